//! Minimal PDF 1.4 writer for the diagnostic report, and a strict reader
//! that re-parses what the writer emits.
//!
//! Streams are uncompressed and only the built-in Helvetica faces are used,
//! so output bytes depend on nothing but the report and the image.

use std::fmt::Write as _;

use swinscan_core::data::Rgb8Image;

use crate::report::{ClassResult, DiagnosticReport};

#[derive(Debug, thiserror::Error)]
pub enum PdfError {
    #[error("layout error: {0}")]
    Layout(String),
    #[error("invalid PDF at byte {offset}: {reason}")]
    Invalid { offset: usize, reason: String },
}

pub const PAGE_WIDTH: f64 = 595.0;
pub const PAGE_HEIGHT: f64 = 842.0;
const MARGIN: f64 = 56.0;
/// Side of the square the highlighted scan is fitted into.
const IMAGE_BOX: f64 = 300.0;
/// Points per image pixel: upscaling stops at `MAX_SCALE`, and an image that
/// would need less than `MIN_SCALE` to fit is a layout error.
const MAX_SCALE: f64 = 4.0;
const MIN_SCALE: f64 = 0.25;
/// Lowest baseline the body may use before the footer block.
const FOOTER_TOP: f64 = 130.0;
const WRAP_CHARS: usize = 100;

const HEADER: &[u8] = b"%PDF-1.4\n%\xE2\xE3\xCF\xD3\n";

#[derive(Clone, Copy)]
enum Font {
    Regular,
    Bold,
}

impl Font {
    fn resource(self) -> &'static str {
        match self {
            Font::Regular => "/F1",
            Font::Bold => "/F2",
        }
    }
}

/// Escapes a string for a PDF literal. Anything outside printable ASCII
/// becomes `?`, since only the standard encoding is available.
fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '(' | ')' | '\\' => {
                out.push('\\');
                out.push(ch);
            }
            ' '..='~' => out.push(ch),
            _ => out.push('?'),
        }
    }
    out
}

fn clip(s: &str, max: usize) -> String {
    if s.chars().count() <= max {
        s.to_owned()
    } else {
        let mut t: String = s.chars().take(max.saturating_sub(3)).collect();
        t.push_str("...");
        t
    }
}

/// Greedy word wrap at `width` characters.
fn wrap(s: &str, width: usize) -> Vec<String> {
    let mut lines = Vec::new();
    let mut line = String::new();
    for word in s.split_whitespace() {
        if !line.is_empty() && line.len() + 1 + word.len() > width {
            lines.push(std::mem::take(&mut line));
        }
        if !line.is_empty() {
            line.push(' ');
        }
        line.push_str(word);
    }
    if !line.is_empty() {
        lines.push(line);
    }
    lines
}

/// A page content stream with a top-down text cursor.
struct Page {
    ops: String,
    y: f64,
}

impl Page {
    fn new() -> Self {
        Self {
            ops: String::new(),
            y: PAGE_HEIGHT - MARGIN,
        }
    }

    fn text_at(&mut self, font: Font, size: f64, x: f64, y: f64, s: &str) {
        let _ = writeln!(self.ops, "BT {} {size} Tf {x:.2} {y:.2} Td ({}) Tj ET", font.resource(), escape(s));
    }

    fn line(&mut self, font: Font, size: f64, s: &str) {
        self.y -= size * 1.45;
        let y = self.y;
        self.text_at(font, size, MARGIN, y, s);
    }

    fn heading(&mut self, s: &str) {
        self.y -= 8.0;
        self.line(Font::Bold, 13.0, s);
    }

    fn rule(&mut self) {
        self.y -= 6.0;
        let _ = writeln!(self.ops, "0.6 G 0.5 w {MARGIN:.2} {:.2} m {:.2} {:.2} l S", self.y, PAGE_WIDTH - MARGIN, self.y);
    }

    fn footer(&mut self, report: &DiagnosticReport, number: usize, total: usize) {
        let mut y = 100.0;
        for (label, digest) in [
            ("Detection weights", &report.model_versions.detection),
            ("Classification weights", &report.model_versions.classification),
        ] {
            self.text_at(Font::Regular, 7.0, MARGIN, y, &clip(&format!("{label}: {digest}"), 120));
            y -= 10.0;
        }
        y -= 4.0;
        for l in wrap(&report.disclaimer, WRAP_CHARS) {
            self.text_at(Font::Bold, 8.0, MARGIN, y, &l);
            y -= 11.0;
        }
        self.text_at(Font::Regular, 8.0, PAGE_WIDTH - MARGIN - 40.0, 36.0, &format!("Page {number} of {total}"));
    }
}

fn probabilities_line(r: &ClassResult) -> String {
    let parts: Vec<String> = r
        .probabilities
        .iter()
        .map(|p| format!("{} {:.4}", p.class, p.probability))
        .collect();
    parts.join(", ")
}

fn top_probability(r: &ClassResult) -> f64 {
    r.probability_of(&r.label).unwrap_or(f64::NAN)
}

/// `D:YYYYMMDDHHmmSSZ` for an RFC 3339 timestamp, if it parses.
fn pdf_date(ts: &str) -> Option<String> {
    let t = chrono::DateTime::parse_from_rfc3339(ts).ok()?;
    Some(t.with_timezone(&chrono::Utc).format("D:%Y%m%d%H%M%SZ").to_string())
}

/// Where and how large the scan is drawn, in points.
struct Placement {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

fn place_image(image: &Rgb8Image, top: f64) -> Result<Placement, PdfError> {
    if image.width == 0 || image.height == 0 || image.pixels.len() != image.width * image.height {
        return Err(PdfError::Layout(format!("image {}x{} has no drawable pixels", image.width, image.height)));
    }
    let side = IMAGE_BOX.min(top - FOOTER_TOP);
    let scale = MAX_SCALE
        .min(side / image.width as f64)
        .min(side / image.height as f64);
    if scale < MIN_SCALE {
        return Err(PdfError::Layout(format!(
            "image {}x{} does not fit a {side:.0}pt box at {MIN_SCALE} pt per pixel",
            image.width, image.height
        )));
    }
    let (w, h) = (image.width as f64 * scale, image.height as f64 * scale);
    Ok(Placement {
        x: MARGIN,
        y: top - h,
        w,
        h,
    })
}

fn first_page(report: &DiagnosticReport, image: &Rgb8Image, total: usize) -> Result<Page, PdfError> {
    let mut p = Page::new();
    p.line(Font::Bold, 18.0, "Brain MRI Diagnostic Report");
    p.line(Font::Regular, 10.0, &clip(&format!("Generated: {}", report.timestamp), 90));
    if let Some(r) = &report.patient_ref {
        p.line(Font::Regular, 10.0, &clip(&format!("Patient reference: {r}"), 90));
    }
    p.line(Font::Regular, 10.0, &format!("Requested analysis: {}", report.task.as_str()));
    p.rule();

    p.heading("Detection");
    let det = &report.detection;
    p.line(Font::Regular, 10.0, &format!("Tumor present: {} (p = {:.4})", det.label, top_probability(det)));
    p.line(Font::Regular, 10.0, &format!("Probabilities: {}", probabilities_line(det)));
    match &report.classification {
        Some(c) => p.line(Font::Regular, 10.0, &format!("Tumor type: {} (details on page 2)", c.label)),
        None if report.tumor_detected() => p.line(Font::Regular, 10.0, "Tumor type: not requested"),
        None => p.line(Font::Regular, 10.0, "Tumor type: not assessed (no tumor detected)"),
    }

    p.heading("Segmentation and size estimate");
    let s = &report.segmentation;
    p.line(Font::Regular, 10.0, &format!("Otsu threshold level: {}", s.threshold));
    if s.region_found {
        let mut area = format!("Largest bright region: {} px", s.area_px);
        if let Some(mm2) = s.area_mm2 {
            let _ = write!(area, " ({mm2:.2} mm2)");
        }
        p.line(Font::Regular, 10.0, &area);
        if let Some(b) = s.bbox {
            p.line(
                Font::Regular,
                10.0,
                &format!("Bounding box: rows {}-{}, columns {}-{}", b.row0, b.row1, b.col0, b.col1),
            );
        }
        if let Some(c) = s.centroid {
            p.line(Font::Regular, 10.0, &format!("Centroid: row {:.1}, column {:.1}", c.row, c.col));
        }
    } else {
        p.line(Font::Regular, 10.0, "No region above the threshold was found.");
    }

    p.line(
        Font::Regular,
        9.0,
        &format!("Scan with the region highlighted in yellow ({}x{} px):", image.width, image.height),
    );
    p.y -= 6.0;
    let at = place_image(image, p.y)?;
    let _ = writeln!(p.ops, "q {:.2} 0 0 {:.2} {:.2} {:.2} cm /Im1 Do Q", at.w, at.h, at.x, at.y);
    p.y = at.y;
    p.footer(report, 1, total);
    Ok(p)
}

fn classification_page(report: &DiagnosticReport, c: &ClassResult, total: usize) -> Page {
    let mut p = Page::new();
    p.line(Font::Bold, 18.0, "Tumor Classification");
    p.line(Font::Regular, 10.0, &clip(&format!("Generated: {}", report.timestamp), 90));
    p.rule();
    p.heading("Predicted type");
    p.line(Font::Regular, 11.0, &format!("{} (p = {:.4})", c.label, top_probability(c)));
    p.heading("Class probabilities");
    for cp in &c.probabilities {
        p.y -= 14.0;
        let y = p.y;
        p.text_at(Font::Regular, 10.0, MARGIN, y, &cp.class);
        p.text_at(Font::Regular, 10.0, MARGIN + 200.0, y, &format!("{:.4}", cp.probability));
    }
    p.y -= 10.0;
    p.line(Font::Regular, 9.0, "Classification runs only when detection reports a tumor.");
    p.footer(report, 2, total);
    p
}

/// Object bodies, numbered from 1 in push order.
struct Objects(Vec<Vec<u8>>);

impl Objects {
    fn push(&mut self, body: impl Into<Vec<u8>>) -> usize {
        self.0.push(body.into());
        self.0.len()
    }

    fn push_stream(&mut self, dict_entries: &str, data: &[u8]) -> usize {
        let mut body = format!("<< {dict_entries}/Length {} >>\nstream\n", data.len()).into_bytes();
        body.extend_from_slice(data);
        body.extend_from_slice(b"\nendstream");
        self.push(body)
    }

    fn set(&mut self, id: usize, body: impl Into<Vec<u8>>) {
        self.0[id - 1] = body.into();
    }

    fn serialize(&self, root: usize, info: usize) -> Vec<u8> {
        let mut out = HEADER.to_vec();
        let mut offsets = Vec::with_capacity(self.0.len());
        for (i, body) in self.0.iter().enumerate() {
            offsets.push(out.len());
            out.extend_from_slice(format!("{} 0 obj\n", i + 1).as_bytes());
            out.extend_from_slice(body);
            out.extend_from_slice(b"\nendobj\n");
        }
        let xref = out.len();
        let mut tail = format!("xref\n0 {}\n0000000000 65535 f \n", self.0.len() + 1);
        for off in offsets {
            let _ = write!(tail, "{off:010} 00000 n \n");
        }
        let _ = write!(
            tail,
            "trailer\n<< /Size {} /Root {root} 0 R /Info {info} 0 R >>\nstartxref\n{xref}\n%%EOF\n",
            self.0.len() + 1
        );
        out.extend_from_slice(tail.as_bytes());
        out
    }
}

/// Renders the report: one page, or two when a classification is present.
pub fn write_pdf(report: &DiagnosticReport, highlighted: &Rgb8Image) -> Result<Vec<u8>, PdfError> {
    let total = if report.classification.is_some() { 2 } else { 1 };
    let mut pages = vec![first_page(report, highlighted, total)?];
    if let Some(c) = &report.classification {
        pages.push(classification_page(report, c, total));
    }

    let mut objs = Objects(Vec::new());
    let catalog = objs.push("<< /Type /Catalog /Pages 2 0 R >>");
    let tree = objs.push(Vec::new());
    let f1 = objs.push("<< /Type /Font /Subtype /Type1 /BaseFont /Helvetica /Encoding /WinAnsiEncoding >>");
    let f2 = objs.push("<< /Type /Font /Subtype /Type1 /BaseFont /Helvetica-Bold /Encoding /WinAnsiEncoding >>");
    let rgb: Vec<u8> = highlighted.pixels.iter().flatten().copied().collect();
    let image = objs.push_stream(
        &format!(
            "/Type /XObject /Subtype /Image /Width {} /Height {} /ColorSpace /DeviceRGB /BitsPerComponent 8 ",
            highlighted.width, highlighted.height
        ),
        &rgb,
    );
    let mut info = format!(
        "<< /Title (Brain MRI Diagnostic Report) /Producer (swinscan {})",
        env!("CARGO_PKG_VERSION")
    );
    if let Some(d) = pdf_date(&report.timestamp) {
        let _ = write!(info, " /CreationDate ({d})");
    }
    info.push_str(" >>");
    let info = objs.push(info);

    let mut kids = Vec::new();
    for page in &pages {
        let content = objs.push_stream("", page.ops.as_bytes());
        let id = objs.push(format!(
            "<< /Type /Page /Parent {tree} 0 R /MediaBox [0 0 {PAGE_WIDTH} {PAGE_HEIGHT}] \
             /Resources << /Font << /F1 {f1} 0 R /F2 {f2} 0 R >> /XObject << /Im1 {image} 0 R >> >> \
             /Contents {content} 0 R >>"
        ));
        kids.push(format!("{id} 0 R"));
    }
    objs.set(tree, format!("<< /Type /Pages /Kids [{}] /Count {} >>", kids.join(" "), kids.len()));
    Ok(objs.serialize(catalog, info))
}

/// What the validating reader found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PdfSummary {
    pub version: String,
    /// In-use objects, excluding the free entry 0.
    pub object_count: usize,
    /// Byte offset of objects 1..=n as listed in the xref table.
    pub xref_offsets: Vec<usize>,
    pub page_count: usize,
    pub image_count: usize,
    pub xref_offset: usize,
}

fn invalid(offset: usize, reason: impl Into<String>) -> PdfError {
    PdfError::Invalid {
        offset,
        reason: reason.into(),
    }
}

fn find(hay: &[u8], needle: &[u8], from: usize) -> Option<usize> {
    hay.get(from..)?.windows(needle.len()).position(|w| w == needle).map(|p| p + from)
}

fn rfind(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).rposition(|w| w == needle)
}

fn expect(bytes: &[u8], pos: usize, lit: &[u8]) -> Result<usize, PdfError> {
    if bytes.get(pos..pos + lit.len()) == Some(lit) {
        Ok(pos + lit.len())
    } else {
        Err(invalid(pos, format!("expected {:?}", String::from_utf8_lossy(lit))))
    }
}

/// Reads one line (without its LF) starting at `pos`.
fn read_line(bytes: &[u8], pos: usize) -> Result<(&str, usize), PdfError> {
    let end = find(bytes, b"\n", pos).ok_or_else(|| invalid(pos, "unterminated line"))?;
    let s = std::str::from_utf8(&bytes[pos..end]).map_err(|_| invalid(pos, "non-ASCII structural line"))?;
    Ok((s, end + 1))
}

/// End (exclusive) of the dictionary opening at `pos`, honouring nested
/// dictionaries and literal strings.
fn dict_end(bytes: &[u8], pos: usize) -> Result<usize, PdfError> {
    expect(bytes, pos, b"<<")?;
    let mut depth = 0usize;
    let mut i = pos;
    while i < bytes.len() {
        match bytes[i] {
            b'<' if bytes.get(i + 1) == Some(&b'<') => {
                depth += 1;
                i += 2;
            }
            b'>' if bytes.get(i + 1) == Some(&b'>') => {
                depth -= 1;
                i += 2;
                if depth == 0 {
                    return Ok(i);
                }
            }
            b'(' => {
                let mut nest = 0usize;
                loop {
                    match bytes.get(i) {
                        None => return Err(invalid(pos, "unterminated string")),
                        Some(b'\\') => i += 1,
                        Some(b'(') => nest += 1,
                        Some(b')') => {
                            nest -= 1;
                            if nest == 0 {
                                break;
                            }
                        }
                        _ => {}
                    }
                    i += 1;
                }
                i += 1;
            }
            _ => i += 1,
        }
    }
    Err(invalid(pos, "unterminated dictionary"))
}

/// Top-level dictionary text with nested dictionaries blanked out, so key
/// lookups only see this object's own entries.
fn top_level(dict: &str) -> String {
    let mut out = String::with_capacity(dict.len());
    let mut depth = 0;
    let b = dict.as_bytes();
    let mut i = 0;
    while i < b.len() {
        if b[i] == b'(' {
            // Blank literal strings so their bytes never read as structure.
            let mut nest = 0usize;
            while i < b.len() {
                match b[i] {
                    b'\\' => {
                        out.push(' ');
                        i += 1;
                    }
                    b'(' => nest += 1,
                    b')' => nest -= 1,
                    _ => {}
                }
                if i < b.len() {
                    out.push(' ');
                    i += 1;
                }
                if nest == 0 {
                    break;
                }
            }
        } else if b[i..].starts_with(b"<<") {
            depth += 1;
            out.push_str(if depth == 1 { "<<" } else { "  " });
            i += 2;
        } else if b[i..].starts_with(b">>") {
            out.push_str(if depth == 1 { ">>" } else { "  " });
            depth -= 1;
            i += 2;
        } else {
            out.push(if depth == 1 { b[i] as char } else { ' ' });
            i += 1;
        }
    }
    out
}

/// The token following `key` in a dictionary's top level.
fn value_of<'a>(top: &'a str, key: &str) -> Option<&'a str> {
    let mut tokens = top.split(|c: char| c.is_whitespace() || c == '[' || c == ']');
    while let Some(t) = tokens.next() {
        if t == key {
            return tokens.find(|t| !t.is_empty());
        }
    }
    None
}

/// Re-parses a PDF produced by `write_pdf`: header and `%%EOF` framing,
/// every object at exactly its xref offset, stream lengths, trailer size,
/// catalog root and page count against the page tree's `/Count`.
pub fn validate_pdf(bytes: &[u8]) -> Result<PdfSummary, PdfError> {
    let mut pos = expect(bytes, 0, b"%PDF-1.")?;
    let (minor, next) = read_line(bytes, pos)?;
    if minor.is_empty() || !minor.bytes().all(|b| b.is_ascii_digit()) {
        return Err(invalid(pos, "bad version"));
    }
    let version = format!("1.{minor}");
    pos = next;
    while bytes.get(pos) == Some(&b'%') {
        pos = find(bytes, b"\n", pos).ok_or_else(|| invalid(pos, "unterminated comment"))? + 1;
    }
    if !bytes.ends_with(b"%%EOF\n") && !bytes.ends_with(b"%%EOF") {
        return Err(invalid(bytes.len(), "missing %%EOF"));
    }

    let sx = rfind(bytes, b"startxref\n").ok_or_else(|| invalid(bytes.len(), "missing startxref"))?;
    let (num, _) = read_line(bytes, sx + b"startxref\n".len())?;
    let xref_offset: usize = num.trim().parse().map_err(|_| invalid(sx, "bad startxref value"))?;
    let mut x = expect(bytes, xref_offset, b"xref\n")?;
    let (sub, next) = read_line(bytes, x)?;
    let (first, count) = sub
        .split_once(' ')
        .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)))
        .ok_or_else(|| invalid(x, "bad xref subsection header"))?;
    if first != 0 || count == 0 {
        return Err(invalid(x, "xref must start at object 0"));
    }
    x = next;
    let mut offsets = Vec::with_capacity(count - 1);
    for i in 0..count {
        let entry = bytes.get(x..x + 20).ok_or_else(|| invalid(x, "truncated xref"))?;
        let entry = std::str::from_utf8(entry).map_err(|_| invalid(x, "bad xref entry"))?;
        let (off, gen, kind) = (&entry[0..10], &entry[11..16], &entry[17..18]);
        if !entry.ends_with(" \n") && !entry.ends_with("\r\n") {
            return Err(invalid(x, "xref entry not 20 bytes"));
        }
        match (i, kind) {
            (0, "f") if gen == "65535" => {}
            (0, _) => return Err(invalid(x, "entry 0 must be free")),
            (_, "n") => offsets.push(off.parse().map_err(|_| invalid(x, "bad xref offset"))?),
            _ => return Err(invalid(x, "free object in use range")),
        }
        x += 20;
    }
    let t = expect(bytes, x, b"trailer\n")?;
    let trailer = top_level(std::str::from_utf8(&bytes[t..dict_end(bytes, t)?]).map_err(|_| invalid(t, "bad trailer"))?);
    let size: usize = value_of(&trailer, "/Size")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| invalid(t, "trailer lacks /Size"))?;
    if size != count {
        return Err(invalid(t, format!("/Size {size} but xref lists {count} entries")));
    }
    let root: usize = value_of(&trailer, "/Root")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| invalid(t, "trailer lacks /Root"))?;

    let mut dicts = Vec::with_capacity(offsets.len());
    for (i, &expected) in offsets.iter().enumerate() {
        if pos != expected {
            return Err(invalid(pos, format!("object {} found at {pos}, xref says {expected}", i + 1)));
        }
        pos = expect(bytes, pos, format!("{} 0 obj\n", i + 1).as_bytes())?;
        let end = dict_end(bytes, pos)?;
        let dict = std::str::from_utf8(&bytes[pos..end]).map_err(|_| invalid(pos, "non-ASCII dictionary"))?;
        let top = top_level(dict);
        pos = end;
        if bytes[pos..].starts_with(b"\nstream\n") {
            let len: usize = value_of(&top, "/Length")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| invalid(pos, "stream without /Length"))?;
            pos += b"\nstream\n".len() + len;
            pos = expect(bytes, pos, b"\nendstream")?;
        }
        pos = expect(bytes, pos, b"\nendobj\n")?;
        dicts.push(top);
    }
    if pos != xref_offset {
        return Err(invalid(pos, "bytes between last object and xref"));
    }

    let ty = |d: &String| value_of(d, "/Type").map(str::to_owned);
    if dicts.get(root.wrapping_sub(1)).and_then(ty).as_deref() != Some("/Catalog") {
        return Err(invalid(0, "root is not a catalog"));
    }
    let page_count = dicts.iter().filter(|d| ty(d).as_deref() == Some("/Page")).count();
    let declared: usize = dicts
        .iter()
        .find(|d| ty(d).as_deref() == Some("/Pages"))
        .and_then(|d| value_of(d, "/Count"))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| invalid(0, "no page tree with /Count"))?;
    if declared != page_count {
        return Err(invalid(0, format!("/Count {declared} but {page_count} page objects")));
    }
    let image_count = dicts.iter().filter(|d| value_of(d, "/Subtype") == Some("/Image")).count();
    Ok(PdfSummary {
        version,
        object_count: offsets.len(),
        xref_offsets: offsets,
        page_count,
        image_count,
        xref_offset,
    })
}

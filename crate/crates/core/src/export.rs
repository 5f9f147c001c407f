//! File writers (and readers for the network formats).
//!
//! Every writer has a pure `render_*` counterpart producing the file
//! contents. Files are written through a temporary sibling and renamed, so
//! a failed run never leaves a truncated output behind.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::environment::{pearson_r, Environment, NodeGeometry};
use crate::factors::LoadingsTable;
use crate::ingest::{CitationMatrix, JournalMeta};
use crate::simgraph::{Edge, SimilarityGraph};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no position for node {0:?}")]
    MissingPosition(String),
    #[error("invalid map style: {0}")]
    Style(&'static str),
    #[error("line {line}: {message}")]
    Pajek { line: usize, message: String },
    #[error("graphml: {0}")]
    GraphMl(String),
}

/// Write `contents` to `path` atomically (temporary file in the same
/// directory, then rename).
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), ExportError> {
    stage(path, contents)?.commit()
}

/// A fully written temporary file waiting to be renamed into place.
pub struct Staged {
    file: tempfile::NamedTempFile,
    path: PathBuf,
}

impl Staged {
    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn commit(self) -> Result<(), ExportError> {
        let path = self.path;
        self.file.persist(&path).map_err(|e| ExportError::Io {
            path: path.clone(),
            source: e.error,
        })?;
        Ok(())
    }
}

pub fn stage(path: &Path, contents: &[u8]) -> Result<Staged, ExportError> {
    let io = |source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut file = tempfile::Builder::new()
        .prefix(".citescope-")
        .tempfile_in(dir)
        .map_err(io)?;
    file.write_all(contents).map_err(io)?;
    file.flush().map_err(io)?;
    Ok(Staged {
        file,
        path: path.to_path_buf(),
    })
}

fn sorted_edges(g: &SimilarityGraph) -> Vec<Edge> {
    let mut edges: Vec<Edge> = g
        .edges
        .iter()
        .map(|e| Edge {
            source: e.source.min(e.target),
            target: e.source.max(e.target),
            cosine: e.cosine,
        })
        .collect();
    edges.sort_by_key(|e| (e.source, e.target));
    edges
}

fn placeholder_node(journal: String) -> NodeGeometry {
    NodeGeometry {
        journal,
        share_total: 0.0,
        share_excl_self: 0.0,
        cn_percent: 0.0,
    }
}

// ---------------------------------------------------------------- Pajek

pub fn render_pajek(g: &SimilarityGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "*Vertices {}", g.nodes.len());
    for (k, node) in g.nodes.iter().enumerate() {
        let _ = writeln!(out, "{} \"{}\"", k + 1, node.journal.replace('"', "'"));
    }
    out.push_str("*Edges\n");
    for e in sorted_edges(g) {
        let _ = writeln!(out, "{} {} {:.6}", e.source + 1, e.target + 1, e.cosine);
    }
    out
}

pub fn write_pajek(g: &SimilarityGraph, path: impl AsRef<Path>) -> Result<(), ExportError> {
    write_atomic(path.as_ref(), render_pajek(g).as_bytes())
}

/// Read a Pajek network as written by [`render_pajek`]. Node geometry is
/// not part of the format and comes back as zeros.
pub fn parse_pajek(text: &str) -> Result<SimilarityGraph, ExportError> {
    let err = |line: usize, message: String| ExportError::Pajek { line, message };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (ln, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let n: usize = header
        .strip_prefix("*Vertices")
        .or_else(|| header.strip_prefix("*vertices"))
        .and_then(|rest| rest.trim().parse().ok())
        .ok_or_else(|| err(ln, format!("expected \"*Vertices n\", found {header:?}")))?;

    let mut nodes = Vec::with_capacity(n);
    for expected in 1..=n {
        let (ln, line) = lines.next().ok_or_else(|| err(0, "missing vertex lines".into()))?;
        let (id, rest) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| err(ln, format!("bad vertex line {line:?}")))?;
        if id.parse::<usize>().ok() != Some(expected) {
            return Err(err(ln, format!("vertex id {id:?}, expected {expected}")));
        }
        let label = rest.trim();
        let label = label
            .strip_prefix('"')
            .and_then(|l| l.strip_suffix('"'))
            .unwrap_or(label);
        nodes.push(placeholder_node(label.to_string()));
    }

    let (ln, line) = lines.next().ok_or_else(|| err(0, "missing *Edges".into()))?;
    if !line.eq_ignore_ascii_case("*edges") {
        return Err(err(ln, format!("expected \"*Edges\", found {line:?}")));
    }
    let mut edges = Vec::new();
    for (ln, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parse_id = |s: &str| -> Result<usize, ExportError> {
            match s.parse::<usize>() {
                Ok(id) if (1..=n).contains(&id) => Ok(id - 1),
                _ => Err(err(ln, format!("bad vertex id {s:?}"))),
            }
        };
        if fields.len() != 3 {
            return Err(err(ln, format!("bad edge line {line:?}")));
        }
        let (a, b) = (parse_id(fields[0])?, parse_id(fields[1])?);
        let cosine: f64 = fields[2]
            .parse()
            .map_err(|_| err(ln, format!("bad weight {:?}", fields[2])))?;
        edges.push(Edge {
            source: a.min(b),
            target: a.max(b),
            cosine,
        });
    }
    Ok(SimilarityGraph {
        environment: None,
        nodes,
        edges,
        suppression_threshold: 0.0,
    })
}

// ---------------------------------------------------------------- GraphML

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

pub fn render_graphml(g: &SimilarityGraph) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    out.push_str("  <key id=\"label\" for=\"node\" attr.name=\"label\" attr.type=\"string\"/>\n");
    for key in ["share_total", "share_excl_self", "cn_percent"] {
        let _ = writeln!(
            out,
            "  <key id=\"{key}\" for=\"node\" attr.name=\"{key}\" attr.type=\"double\"/>"
        );
    }
    out.push_str("  <key id=\"cosine\" for=\"edge\" attr.name=\"cosine\" attr.type=\"double\"/>\n");
    out.push_str("  <key id=\"suppression_threshold\" for=\"graph\" attr.name=\"suppression_threshold\" attr.type=\"double\"/>\n");
    out.push_str("  <graph id=\"G\" edgedefault=\"undirected\">\n");
    let _ = writeln!(
        out,
        "    <data key=\"suppression_threshold\">{:.6}</data>",
        g.suppression_threshold
    );
    for (k, node) in g.nodes.iter().enumerate() {
        let _ = writeln!(out, "    <node id=\"n{}\">", k + 1);
        let _ = writeln!(out, "      <data key=\"label\">{}</data>", xml_escape(&node.journal));
        let _ = writeln!(out, "      <data key=\"share_total\">{:.9}</data>", node.share_total);
        let _ = writeln!(out, "      <data key=\"share_excl_self\">{:.9}</data>", node.share_excl_self);
        let _ = writeln!(out, "      <data key=\"cn_percent\">{:.9}</data>", node.cn_percent);
        out.push_str("    </node>\n");
    }
    for (k, e) in sorted_edges(g).iter().enumerate() {
        let _ = writeln!(
            out,
            "    <edge id=\"e{}\" source=\"n{}\" target=\"n{}\">",
            k + 1,
            e.source + 1,
            e.target + 1
        );
        let _ = writeln!(out, "      <data key=\"cosine\">{:.6}</data>", e.cosine);
        out.push_str("    </edge>\n");
    }
    out.push_str("  </graph>\n</graphml>\n");
    out
}

pub fn write_graphml(g: &SimilarityGraph, path: impl AsRef<Path>) -> Result<(), ExportError> {
    write_atomic(path.as_ref(), render_graphml(g).as_bytes())
}

pub fn parse_graphml(text: &str) -> Result<SimilarityGraph, ExportError> {
    let gerr = |m: String| ExportError::GraphMl(m);
    let doc = roxmltree::Document::parse(text).map_err(|e| gerr(e.to_string()))?;
    let graph = doc
        .descendants()
        .find(|n| n.has_tag_name("graph"))
        .ok_or_else(|| gerr("no <graph> element".into()))?;

    fn data<'a>(node: roxmltree::Node<'a, 'a>, key: &str) -> Option<&'a str> {
        node.children()
            .find(|c| c.has_tag_name("data") && c.attribute("key") == Some(key))
            .and_then(|c| c.text())
    }
    let number = |node: roxmltree::Node, key: &str| -> Result<f64, ExportError> {
        match data(node, key) {
            None => Ok(0.0),
            Some(t) => t
                .trim()
                .parse()
                .map_err(|_| gerr(format!("bad {key} value {t:?}"))),
        }
    };

    let mut ids: HashMap<&str, usize> = HashMap::new();
    let mut nodes = Vec::new();
    for node in graph.children().filter(|c| c.has_tag_name("node")) {
        let id = node.attribute("id").ok_or_else(|| gerr("node without id".into()))?;
        if ids.insert(id, nodes.len()).is_some() {
            return Err(gerr(format!("duplicate node id {id:?}")));
        }
        nodes.push(NodeGeometry {
            journal: data(node, "label").unwrap_or(id).to_string(),
            share_total: number(node, "share_total")?,
            share_excl_self: number(node, "share_excl_self")?,
            cn_percent: number(node, "cn_percent")?,
        });
    }
    let mut edges = Vec::new();
    for edge in graph.children().filter(|c| c.has_tag_name("edge")) {
        let end = |attr: &str| -> Result<usize, ExportError> {
            let id = edge
                .attribute(attr)
                .ok_or_else(|| gerr(format!("edge without {attr}")))?;
            ids.get(id)
                .copied()
                .ok_or_else(|| gerr(format!("edge refers to unknown node {id:?}")))
        };
        let (a, b) = (end("source")?, end("target")?);
        edges.push(Edge {
            source: a.min(b),
            target: a.max(b),
            cosine: number(edge, "cosine")?,
        });
    }
    Ok(SimilarityGraph {
        environment: None,
        nodes,
        edges,
        suppression_threshold: number(graph, "suppression_threshold")?,
    })
}

// ---------------------------------------------------------------- DOT

fn dot_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn render_dot(g: &SimilarityGraph) -> String {
    let name = g
        .environment
        .as_ref()
        .map(|e| format!("{} environment of {}", e.direction, e.seed))
        .unwrap_or_else(|| "citation map".into());
    let mut out = String::new();
    let _ = writeln!(out, "graph {} {{", dot_quote(&name));
    for (k, node) in g.nodes.iter().enumerate() {
        let _ = writeln!(
            out,
            "  n{} [label={}, share_total={:.9}, share_excl_self={:.9}, cn_percent={:.9}];",
            k + 1,
            dot_quote(&node.journal),
            node.share_total,
            node.share_excl_self,
            node.cn_percent
        );
    }
    for e in sorted_edges(g) {
        let _ = writeln!(
            out,
            "  n{} -- n{} [weight={:.6}, label=\"{:.3}\"];",
            e.source + 1,
            e.target + 1,
            e.cosine,
            e.cosine
        );
    }
    out.push_str("}\n");
    out
}

pub fn write_dot(g: &SimilarityGraph, path: impl AsRef<Path>) -> Result<(), ExportError> {
    write_atomic(path.as_ref(), render_dot(g).as_bytes())
}

// ---------------------------------------------------------------- SVG

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelPolicy {
    #[default]
    Always,
    /// Only nodes with at least one edge.
    Connected,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapStyle {
    pub width: f64,
    pub height: f64,
    /// Axis length per unit share.
    pub ellipse_scale: f64,
    /// Stroke width per unit cosine.
    pub edge_width_scale: f64,
    pub label_policy: LabelPolicy,
}

impl Default for MapStyle {
    fn default() -> Self {
        Self {
            width: 1000.0,
            height: 1000.0,
            ellipse_scale: 200.0,
            edge_width_scale: 4.0,
            label_policy: LabelPolicy::Always,
        }
    }
}

impl MapStyle {
    fn validate(&self) -> Result<(), ExportError> {
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(ExportError::Style("canvas dimensions must be positive"));
        }
        if self.ellipse_scale.is_nan() || self.ellipse_scale <= 0.0 {
            return Err(ExportError::Style("ellipse_scale must be positive"));
        }
        if self.edge_width_scale.is_nan() || self.edge_width_scale <= 0.0 {
            return Err(ExportError::Style("edge_width_scale must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Layout {
    /// Member order, clockwise from 12 o'clock.
    #[default]
    Circular,
    Precomputed(HashMap<String, (f64, f64)>),
}

/// Smallest rendered semi-axis, so all-self-citing or isolated journals
/// stay visible.
pub const HAIRLINE: f64 = 0.5;

pub fn circular_positions(n: usize, style: &MapStyle) -> Vec<(f64, f64)> {
    let (cx, cy) = (style.width / 2.0, style.height / 2.0);
    if n == 1 {
        return vec![(cx, cy)];
    }
    let radius = 0.4 * style.width.min(style.height);
    (0..n)
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / n as f64;
            (cx + radius * theta.sin(), cy - radius * theta.cos())
        })
        .collect()
}

pub fn render_svg_map(g: &SimilarityGraph, style: &MapStyle, layout: &Layout) -> Result<String, ExportError> {
    style.validate()?;
    let positions = match layout {
        Layout::Circular => circular_positions(g.nodes.len(), style),
        Layout::Precomputed(map) => g
            .nodes
            .iter()
            .map(|n| {
                map.get(&n.journal)
                    .copied()
                    .ok_or_else(|| ExportError::MissingPosition(n.journal.clone()))
            })
            .collect::<Result<_, _>>()?,
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.3}\" height=\"{h:.3}\" viewBox=\"0 0 {w:.3} {h:.3}\">",
        w = style.width,
        h = style.height
    );
    out.push_str("  <g stroke=\"#888888\" stroke-opacity=\"0.7\">\n");
    for e in sorted_edges(g) {
        let (a, b) = (positions[e.source], positions[e.target]);
        let _ = writeln!(
            out,
            "    <line x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" stroke-width=\"{:.3}\"/>",
            a.0,
            a.1,
            b.0,
            b.1,
            e.cosine * style.edge_width_scale
        );
    }
    out.push_str("  </g>\n");
    out.push_str("  <g fill=\"#8fb8de\" fill-opacity=\"0.8\" stroke=\"#33597a\" stroke-width=\"0.5\">\n");
    for (node, &(x, y)) in g.nodes.iter().zip(&positions) {
        let rx = (node.share_excl_self * style.ellipse_scale).max(HAIRLINE);
        let ry = (node.share_total * style.ellipse_scale).max(HAIRLINE);
        let _ = writeln!(
            out,
            "    <ellipse cx=\"{x:.3}\" cy=\"{y:.3}\" rx=\"{rx:.3}\" ry=\"{ry:.3}\"><title>{}</title></ellipse>",
            xml_escape(&node.journal)
        );
    }
    out.push_str("  </g>\n");
    if style.label_policy != LabelPolicy::None {
        out.push_str("  <g font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">\n");
        for (k, (node, &(x, y))) in g.nodes.iter().zip(&positions).enumerate() {
            if style.label_policy == LabelPolicy::Connected && g.degree(k) == 0 {
                continue;
            }
            let ry = (node.share_total * style.ellipse_scale).max(HAIRLINE);
            let _ = writeln!(
                out,
                "    <text x=\"{x:.3}\" y=\"{:.3}\">{}</text>",
                y + ry + 14.0,
                xml_escape(&node.journal)
            );
        }
        out.push_str("  </g>\n");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn write_svg_map(
    g: &SimilarityGraph,
    style: &MapStyle,
    layout: &Layout,
    path: impl AsRef<Path>,
) -> Result<(), ExportError> {
    let svg = render_svg_map(g, style, layout)?;
    write_atomic(path.as_ref(), svg.as_bytes())
}

// ---------------------------------------------------------------- report

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .flexible(true)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(vec![])
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub journal: String,
    pub impact_factor: Option<f64>,
    pub total_cites: Option<u64>,
    pub cn_percent: f64,
}

/// Rows sorted by C/N descending (ties by label), joined with metadata.
pub fn report_rows(geometry: &[NodeGeometry], meta: &[JournalMeta]) -> Vec<ReportRow> {
    let lookup: HashMap<&str, &JournalMeta> = meta.iter().map(|m| (m.label.as_str(), m)).collect();
    let mut rows: Vec<ReportRow> = geometry
        .iter()
        .map(|g| {
            let m = lookup.get(g.journal.as_str());
            ReportRow {
                journal: g.journal.clone(),
                impact_factor: m.and_then(|m| m.impact_factor),
                total_cites: m.and_then(|m| m.total_cites),
                cn_percent: g.cn_percent,
            }
        })
        .collect();
    rows.sort_by(|a, b| b.cn_percent.total_cmp(&a.cn_percent).then_with(|| a.journal.cmp(&b.journal)));
    rows
}

/// Correlation of C/N with total cites over rows that carry total cites.
/// `None` with fewer than two such rows or a constant column.
pub fn report_correlation(rows: &[ReportRow]) -> Option<f64> {
    let (cn, tc): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| r.total_cites.map(|t| (r.cn_percent, t as f64)))
        .unzip();
    pearson_r(&cn, &tc).ok()
}

pub fn render_report(
    env: &Environment,
    geometry: &[NodeGeometry],
    meta: &[JournalMeta],
    factors: Option<&LoadingsTable>,
) -> String {
    let rows = report_rows(geometry, meta);
    let mut w = csv_writer();
    w.write_record(["journal", "impact_factor", "total_cites", "cn_percent"])
        .expect("in-memory write");
    for r in &rows {
        w.write_record([
            r.journal.clone(),
            r.impact_factor.map(|x| x.to_string()).unwrap_or_default(),
            r.total_cites.map(|x| x.to_string()).unwrap_or_default(),
            format!("{:.6}", r.cn_percent),
        ])
        .expect("in-memory write");
    }
    let mut out = finish(w);
    let _ = writeln!(
        out,
        "\n# seed,{},direction,{},members,{},grand_total,{}",
        env.seed.replace(',', " "),
        env.direction,
        env.len(),
        env.grand_total()
    );
    if let Some(r) = report_correlation(&rows) {
        let _ = writeln!(out, "pearson_r_cn_percent_total_cites,{r:.6}");
    }
    if let Some(table) = factors {
        out.push_str("\n# rotated loadings\n");
        out.push_str(&table.to_csv());
    }
    out
}

pub fn write_report(
    env: &Environment,
    geometry: &[NodeGeometry],
    meta: &[JournalMeta],
    factors: Option<&LoadingsTable>,
    path: impl AsRef<Path>,
) -> Result<(), ExportError> {
    write_atomic(path.as_ref(), render_report(env, geometry, meta, factors).as_bytes())
}

// ---------------------------------------------------------------- matrix

/// Dense CSV in the layout accepted by [`crate::ingest::parse_matrix`].
pub fn render_matrix_csv(m: &CitationMatrix) -> String {
    let mut w = csv_writer();
    let mut header = vec![String::new()];
    header.extend(m.cited_labels().iter().cloned());
    w.write_record(&header).expect("in-memory write");
    for (label, row) in m.citing_labels().iter().zip(m.rows()) {
        let mut rec = vec![label.clone()];
        rec.extend(row.iter().map(u64::to_string));
        w.write_record(&rec).expect("in-memory write");
    }
    finish(w)
}

pub fn write_matrix_csv(m: &CitationMatrix, path: impl AsRef<Path>) -> Result<(), ExportError> {
    write_atomic(path.as_ref(), render_matrix_csv(m).as_bytes())
}

//! Figure-style exports: scatter plots of 2-D projections, dendrograms, and
//! projection CSVs.
//!
//! Every renderer returns a self-contained SVG string with no external
//! references, built with fixed-precision coordinates so the same input
//! always yields the same bytes.

use std::fmt::Write as _;

use crate::clustering::Dendrogram;
use crate::embedding::{Projection2D, ProjectionMethod};
use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 46.0;

/// Category colors cycled over label ids.
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn color_for(label: usize) -> &'static str {
    PALETTE[label % PALETTE.len()]
}

fn method_caption(method: &ProjectionMethod) -> String {
    match method {
        ProjectionMethod::Pca { explained_variance } => format!(
            "PCA (explained variance {:.3} / {:.3})",
            explained_variance[0], explained_variance[1]
        ),
        ProjectionMethod::Tsne {
            perplexity,
            iters,
            seed,
        } => format!("t-SNE (perplexity {perplexity}, {iters} iterations, seed {seed})"),
    }
}

fn svg_open(out: &mut String) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    );
}

/// Data range padded so degenerate spans still draw, mapped onto one axis.
struct AxisScale {
    lo: f64,
    span: f64,
    screen_lo: f64,
    screen_span: f64,
}

impl AxisScale {
    fn fit(values: impl Iterator<Item = f64>, screen_lo: f64, screen_hi: f64) -> AxisScale {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let pad = (hi - lo).max(1e-9) * 0.05;
        AxisScale {
            lo: lo - pad,
            span: (hi - lo) + 2.0 * pad,
            screen_lo,
            screen_span: screen_hi - screen_lo,
        }
    }

    fn place(&self, v: f64) -> f64 {
        self.screen_lo + (v - self.lo) / self.span * self.screen_span
    }
}

/// Renders a projection as a scatter plot, one dot per row, colored by the
/// optional labels; identical inputs produce identical bytes.
pub fn scatter_svg(projection: &Projection2D, labels: Option<&[usize]>) -> Result<String> {
    let points = &projection.points;
    if points.is_empty() {
        return Err(Error::Config("projection has no points".into()));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Config("projection has non-finite points".into()));
    }
    if let Some(l) = labels {
        if l.len() != points.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} points",
                l.len(),
                points.len()
            )));
        }
    }

    let x = AxisScale::fit(points.iter().map(|p| p[0]), MARGIN, WIDTH - MARGIN);
    let y = AxisScale::fit(points.iter().map(|p| p[1]), HEIGHT - MARGIN, MARGIN);

    let mut out = String::new();
    svg_open(&mut out);
    let _ = write!(
        out,
        "<text x=\"{:.2}\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">{}</text>\n\
         <rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{:.2}\" height=\"{:.2}\" \
         fill=\"none\" stroke=\"#444\"/>\n",
        WIDTH / 2.0,
        method_caption(&projection.method),
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN,
    );
    for (tick, anchor, axis) in [(x.lo, "start", 'x'), (x.lo + x.span, "end", 'x')] {
        let _ = (anchor, axis);
        let _ = write!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{:.3}</text>\n",
            x.place(tick),
            HEIGHT - MARGIN + 16.0,
            tick
        );
    }
    for tick in [y.lo, y.lo + y.span] {
        let _ = write!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{:.3}</text>\n",
            MARGIN - 6.0,
            y.place(tick) + 4.0,
            tick
        );
    }

    for (row, p) in points.iter().enumerate() {
        let color = labels.map_or(PALETTE[0], |l| color_for(l[row]));
        let _ = write!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\" fill-opacity=\"0.8\"/>\n",
            x.place(p[0]),
            y.place(p[1]),
        );
    }

    if let Some(l) = labels {
        let mut distinct: Vec<usize> = l.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        for (slot, label) in distinct.iter().enumerate() {
            let ly = MARGIN + 14.0 + slot as f64 * 16.0;
            let _ = write!(
                out,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"{}\"/>\n\
                 <text x=\"{:.2}\" y=\"{:.2}\">{label}</text>\n",
                WIDTH - MARGIN - 40.0,
                ly,
                color_for(*label),
                WIDTH - MARGIN - 32.0,
                ly + 4.0,
            );
        }
    }

    out.push_str("</svg>\n");
    Ok(out)
}

/// Writes a projection as `x,y,label` rows; the label cell is empty when no
/// labels are attached.
pub fn projection_csv(projection: &Projection2D, labels: Option<&[usize]>) -> Result<String> {
    if let Some(l) = labels {
        if l.len() != projection.points.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} points",
                l.len(),
                projection.points.len()
            )));
        }
    }
    let mut out = String::from("x,y,label\n");
    for (row, p) in projection.points.iter().enumerate() {
        let label = labels.map_or(String::new(), |l| l[row].to_string());
        let _ = write!(out, "{},{},{label}\n", p[0], p[1]);
    }
    Ok(out)
}

/// Left-to-right order of the leaves under each root, children visited
/// smaller id first.
fn leaf_order(num_leaves: usize, children: &[Option<(usize, usize)>]) -> Vec<usize> {
    let total = children.len();
    let mut is_child = vec![false; total];
    for pair in children.iter().flatten() {
        is_child[pair.0] = true;
        is_child[pair.1] = true;
    }
    let mut order = Vec::with_capacity(num_leaves);
    for root in 0..total {
        if is_child[root] {
            continue;
        }
        let mut stack = vec![root];
        while let Some(node) = stack.pop() {
            match children[node] {
                Some((a, b)) => {
                    stack.push(b);
                    stack.push(a);
                }
                None => order.push(node),
            }
        }
    }
    order
}

/// Renders a dendrogram with leaves along the bottom and merge height equal
/// to linkage distance; identical inputs produce identical bytes.
pub fn dendrogram_svg(dendro: &Dendrogram) -> Result<String> {
    let n = dendro.num_leaves();
    let merges = dendro.merges();
    let total = n + merges.len();
    let mut children: Vec<Option<(usize, usize)>> = vec![None; total];
    for (i, merge) in merges.iter().enumerate() {
        let node = n + i;
        if merge.cluster_a >= node || merge.cluster_b >= node {
            return Err(Error::Format(format!(
                "merge {i} references clusters ({}, {}) at or past its own id {node}",
                merge.cluster_a, merge.cluster_b
            )));
        }
        children[node] = Some((merge.cluster_a, merge.cluster_b));
    }

    let order = leaf_order(n, &children);
    let mut slot = vec![0.0f64; total];
    for (position, leaf) in order.iter().enumerate() {
        slot[*leaf] = position as f64;
    }
    let mut height = vec![0.0f64; total];
    for (i, merge) in merges.iter().enumerate() {
        let node = n + i;
        let (a, b) = children[node].expect("filled above");
        slot[node] = (slot[a] + slot[b]) / 2.0;
        height[node] = merge.distance;
    }

    let dmax = merges.iter().fold(0.0f64, |m, v| m.max(v.distance)).max(1e-9);
    let span = (n.max(2) - 1) as f64;
    let px = |s: f64| MARGIN + s / span * (WIDTH - 2.0 * MARGIN);
    let py = |d: f64| HEIGHT - MARGIN - d / (dmax * 1.05) * (HEIGHT - 2.0 * MARGIN);

    let mut out = String::new();
    svg_open(&mut out);
    let _ = write!(
        out,
        "<text x=\"{:.2}\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">\
         Dendrogram ({n} leaves, cosine average linkage)</text>\n",
        WIDTH / 2.0
    );
    for tick in 0..=4 {
        let d = dmax * 1.05 * tick as f64 / 4.0;
        let _ = write!(
            out,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#ccc\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{:.3}</text>\n",
            MARGIN,
            py(d),
            WIDTH - MARGIN,
            py(d),
            MARGIN - 6.0,
            py(d) + 4.0,
            d
        );
    }

    for (i, _) in merges.iter().enumerate() {
        let node = n + i;
        let (a, b) = children[node].expect("filled above");
        let top = py(height[node]);
        let _ = write!(
            out,
            "<path d=\"M {:.2} {:.2} V {:.2} H {:.2} V {:.2}\" \
             fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>\n",
            px(slot[a]),
            py(height[a]),
            top,
            px(slot[b]),
            py(height[b]),
        );
    }

    if n <= 40 {
        for (position, leaf) in order.iter().enumerate() {
            let _ = write!(
                out,
                "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{leaf}</text>\n",
                px(position as f64),
                HEIGHT - MARGIN + 16.0,
            );
        }
    }

    out.push_str("</svg>\n");
    Ok(out)
}

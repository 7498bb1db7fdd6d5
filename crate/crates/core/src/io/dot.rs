use std::fmt::Write;

use crate::selection::EffectReport;
use crate::tree::Tree;

const MIN_WIDTH: f64 = 0.5;
const MAX_WIDTH: f64 = 5.0;
const LEVEL_COLORS: [&str; 8] = [
    "#c6dbef", "#c7e9c0", "#fdd0a2", "#dadaeb", "#fcbba1", "#d9d9d9", "#fee391", "#ccece6",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffectMode {
    Direct,
    Total,
}

fn quote(label: &str) -> String {
    format!("\"{}\"", label.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Graphviz digraph with gray structural edges and one edge per active
/// effect into an `outcome` node: red for positive, blue for negative,
/// width linear in `|effect|` from 0.5 up to 5 for the largest effect.
pub fn export_dot(tree: &Tree, report: &EffectReport, mode: EffectMode) -> String {
    let effects: Vec<(f64, bool)> = report
        .rows
        .iter()
        .map(|r| match mode {
            EffectMode::Direct => (r.direct, r.direct_active),
            EffectMode::Total => (r.total, r.total_active),
        })
        .collect();
    let max = effects
        .iter()
        .filter(|(_, active)| *active)
        .fold(0.0f64, |m, (v, _)| m.max(v.abs()));

    let mut out =
        String::from("digraph effects {\n  rankdir=TB;\n  node [shape=ellipse, style=filled];\n");
    for j in 0..tree.node_count() {
        let level = tree.level(j);
        let _ = writeln!(
            out,
            "  {} [class=\"level{level}\", fillcolor=\"{}\"];",
            quote(tree.label(j)),
            LEVEL_COLORS[(level - 1) % LEVEL_COLORS.len()]
        );
    }
    out.push_str("  outcome [shape=box, fillcolor=\"white\", label=\"outcome\"];\n");
    for e in tree.edges() {
        let _ = writeln!(
            out,
            "  {} -> {} [color=\"gray\"];",
            quote(tree.label(e.parent)),
            quote(tree.label(e.child))
        );
    }
    for (j, &(v, active)) in effects.iter().enumerate() {
        if !active || j >= tree.node_count() {
            continue;
        }
        let width = MIN_WIDTH + (MAX_WIDTH - MIN_WIDTH) * v.abs() / max;
        let color = if v > 0.0 { "red" } else { "blue" };
        let _ = writeln!(
            out,
            "  {} -> outcome [color=\"{color}\", penwidth={width:.4}];",
            quote(tree.label(j))
        );
    }
    out.push_str("}\n");
    out
}

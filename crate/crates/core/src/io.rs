//! Text model format and trace outputs.
//!
//! Model files are line oriented:
//!
//! ```text
//! MINSUM1
//! <num_nodes>
//! <label count per node>
//! <num_edges>
//! <u> <v>                      one line per edge, u < v
//! <unary costs>                one line per node
//! <pairwise costs, row-major>  one line per edge
//! ```
//!
//! Tokens are whitespace separated and blank lines are ignored. Floats are
//! written with 17 significant digits, so a written model parses back to the
//! same values.

use crate::engine::{Checkpoint, Mode, SolveTrace};
use crate::error::ParseError;
use crate::model::{GraphicalModel, Table};
use crate::schedule::{ScheduleStats, POOL_ORDER};
use crate::updates::Rule;
use serde::Serialize;
use std::collections::HashSet;
use std::fmt::Write as _;

pub const MAGIC: &str = "MINSUM1";
pub const TRACE_HEADER: &str = "normalized_iterations,oracle_calls,dual,wall_time_ms";

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    /// Next non-blank line with its 1-based number.
    fn next(&mut self, what: &str) -> Result<(usize, Vec<&'a str>), ParseError> {
        for (i, line) in self.inner.by_ref() {
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if !tokens.is_empty() {
                return Ok((i + 1, tokens));
            }
        }
        Err(ParseError::new(0, format!("unexpected end of file, expected {what}")))
    }
}

fn parse_usize(line: usize, token: &str, what: &str) -> Result<usize, ParseError> {
    token
        .parse()
        .map_err(|_| ParseError::new(line, format!("invalid {what} '{token}'")))
}

fn parse_costs(line: usize, tokens: &[&str], expected: usize, what: &str) -> Result<Vec<f64>, ParseError> {
    if tokens.len() != expected {
        return Err(ParseError::new(
            line,
            format!("{what}: expected {expected} values, found {}", tokens.len()),
        ));
    }
    tokens
        .iter()
        .map(|t| match t.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            Ok(_) => Err(ParseError::new(line, format!("{what}: non-finite cost '{t}'"))),
            Err(_) => Err(ParseError::new(line, format!("{what}: invalid number '{t}'"))),
        })
        .collect()
}

fn single<'a>(line: usize, tokens: &[&'a str], what: &str) -> Result<&'a str, ParseError> {
    match tokens {
        [t] => Ok(t),
        _ => Err(ParseError::new(line, format!("expected a single {what}"))),
    }
}

pub fn parse_model(text: &str) -> Result<GraphicalModel, ParseError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (ln, tokens) = lines.next("magic")?;
    if tokens != [MAGIC] {
        return Err(ParseError::new(ln, format!("expected magic '{MAGIC}'")));
    }
    let (ln, tokens) = lines.next("node count")?;
    let num_nodes = parse_usize(ln, single(ln, &tokens, "node count")?, "node count")?;
    if num_nodes == 0 {
        return Err(ParseError::new(ln, "model must have at least one node"));
    }
    let (ln, tokens) = lines.next("label counts")?;
    if tokens.len() != num_nodes {
        return Err(ParseError::new(
            ln,
            format!("expected {num_nodes} label counts, found {}", tokens.len()),
        ));
    }
    let label_counts = tokens
        .iter()
        .map(|t| match parse_usize(ln, t, "label count")? {
            0 => Err(ParseError::new(ln, "label counts must be positive")),
            c => Ok(c),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (ln, tokens) = lines.next("edge count")?;
    let num_edges = parse_usize(ln, single(ln, &tokens, "edge count")?, "edge count")?;

    let mut edges = Vec::with_capacity(num_edges);
    let mut seen = HashSet::with_capacity(num_edges);
    for _ in 0..num_edges {
        let (ln, tokens) = lines.next("edge")?;
        let [u, v] = tokens[..] else {
            return Err(ParseError::new(ln, "edge line must hold exactly two node indices"));
        };
        let (u, v) = (parse_usize(ln, u, "node index")?, parse_usize(ln, v, "node index")?);
        if u >= num_nodes || v >= num_nodes {
            return Err(ParseError::new(ln, format!("edge ({u},{v}) references a missing node")));
        }
        if u >= v {
            return Err(ParseError::new(ln, format!("edge ({u},{v}) must satisfy u < v")));
        }
        if !seen.insert((u, v)) {
            return Err(ParseError::new(ln, format!("duplicate edge ({u},{v})")));
        }
        edges.push((u, v));
    }

    let mut unary = Vec::with_capacity(num_nodes);
    for (node, &count) in label_counts.iter().enumerate() {
        let (ln, tokens) = lines.next("unary costs")?;
        unary.push(parse_costs(ln, &tokens, count, &format!("unary of node {node}"))?);
    }
    let mut pairwise = Vec::with_capacity(num_edges);
    for (e, &(u, v)) in edges.iter().enumerate() {
        let (ln, tokens) = lines.next("pairwise costs")?;
        let (rows, cols) = (label_counts[u], label_counts[v]);
        let data = parse_costs(ln, &tokens, rows * cols, &format!("pairwise of edge {e}"))?;
        pairwise.push(Table::new(rows, cols, data).expect("length checked"));
    }
    if let Ok((ln, _)) = lines.next("") {
        return Err(ParseError::new(ln, "unexpected trailing content"));
    }
    GraphicalModel::new(unary, edges, pairwise).map_err(|e| ParseError::new(0, e.to_string()))
}

fn write_floats(out: &mut String, values: &[f64]) {
    for (i, x) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{x:.16e}").unwrap();
    }
    out.push('\n');
}

pub fn serialize_model(model: &GraphicalModel) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(out, "{}", model.num_nodes()).unwrap();
    let counts: Vec<String> = model.label_counts().iter().map(usize::to_string).collect();
    writeln!(out, "{}", counts.join(" ")).unwrap();
    writeln!(out, "{}", model.num_edges()).unwrap();
    for (u, v) in model.edges() {
        writeln!(out, "{u} {v}").unwrap();
    }
    for u in model.unaries() {
        write_floats(&mut out, u);
    }
    for p in model.pairwise_tables() {
        write_floats(&mut out, p.as_slice());
    }
    out
}

pub fn trace_csv(checkpoints: &[Checkpoint]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for c in checkpoints {
        writeln!(
            out,
            "{},{},{},{}",
            c.normalized_iterations, c.oracle_calls, c.dual, c.wall_time_ms
        )
        .unwrap();
    }
    out
}

/// JSON companion of a trace file.
#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub rule: Rule,
    pub mode: Mode,
    pub workers: usize,
    pub seed: u64,
    pub final_dual: f64,
    pub final_energy: f64,
    pub gap: f64,
    pub rounds_in_schedule: usize,
    pub max_matching_width: usize,
    pub edge_pool_order: &'static str,
    pub converged: bool,
    pub iterations: usize,
    pub normalized_iterations: f64,
    pub oracle_calls: u64,
    pub labeling: Vec<usize>,
}

impl Summary {
    pub fn new(trace: &SolveTrace, rule: Rule, mode: Mode, workers: usize, seed: u64, stats: &ScheduleStats) -> Self {
        let last = trace.checkpoints.last().expect("trace has checkpoints");
        Summary {
            rule,
            mode,
            workers,
            seed,
            final_dual: trace.final_dual,
            final_energy: trace.final_energy,
            gap: trace.gap(),
            rounds_in_schedule: stats.rounds,
            max_matching_width: stats.max_width,
            edge_pool_order: POOL_ORDER,
            converged: trace.converged,
            iterations: trace.iterations,
            normalized_iterations: last.normalized_iterations,
            oracle_calls: last.oracle_calls,
            labeling: trace.final_labeling.0.clone(),
        }
    }
}

/// Merges per-rule traces into one table keyed by normalized iterations.
/// Each dual column carries its latest value forward to keys it lacks.
pub fn merged_csv(traces: &[(Rule, &[Checkpoint])]) -> String {
    let mut keys: Vec<f64> = traces
        .iter()
        .flat_map(|(_, cps)| cps.iter().map(|c| c.normalized_iterations))
        .collect();
    keys.sort_by(f64::total_cmp);
    keys.dedup();
    let mut out = String::from("normalized_iterations");
    for (rule, _) in traces {
        write!(out, ",dual_{rule}").unwrap();
    }
    out.push('\n');
    let mut cursors = vec![0usize; traces.len()];
    for k in keys {
        write!(out, "{k}").unwrap();
        for ((_, cps), cur) in traces.iter().zip(cursors.iter_mut()) {
            while *cur + 1 < cps.len() && cps[*cur + 1].normalized_iterations <= k {
                *cur += 1;
            }
            write!(out, ",{}", cps[*cur].dual).unwrap();
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{gen_complete, SplitMix64};
    use proptest::prelude::*;

    const TWO_NODE: &str = "MINSUM1\n2\n2 2\n1\n0 1\n4 0\n2 0\n0 1 7 5\n";

    #[test]
    fn parses_two_node_file() {
        let m = parse_model(TWO_NODE).unwrap();
        assert_eq!(m.num_nodes(), 2);
        assert_eq!(m.unary(0), &[4.0, 0.0]);
        assert_eq!(m.pairwise(0).get(1, 0), 7.0);
        assert_eq!(parse_model(&serialize_model(&m)).unwrap(), m);
    }

    #[test]
    fn accepts_scientific_notation_and_blank_lines() {
        let text = "MINSUM1\n\n1\n3\n0\n1e0 2.5E-1   -3.0e+2\n\n";
        let m = parse_model(text).unwrap();
        assert_eq!(m.unary(0), &[1.0, 0.25, -300.0]);
    }

    #[test]
    fn errors_name_the_offending_line() {
        let cases = [
            ("MINSUM2\n", 1),
            ("MINSUM1\n2\n2 2\n1\n0 1\n4 x\n2 0\n0 1 7 5\n", 6),
            ("MINSUM1\n2\n2 2\n1\n1 0\n4 0\n2 0\n0 1 7 5\n", 5),
            ("MINSUM1\n2\n2 2\n2\n0 1\n0 1\n4 0\n2 0\n0 1 7 5\n0 1 7 5\n", 6),
            ("MINSUM1\n2\n2 2\n1\n0 1\n4 0\n2 0\n0 1 7\n", 8),
            ("MINSUM1\n2\n2 2\n1\n0 1\n4 0\n2 inf\n0 1 7 5\n", 7),
            ("MINSUM1\n2\n2 0\n1\n0 1\n", 3),
            ("MINSUM1\n2\n2 2\n1\n0 5\n", 5),
            ("MINSUM1\n2\n2 2\n1\n0 1\n4 0\n2 0\n0 1 7 5\n9\n", 9),
        ];
        for (text, line) in cases {
            let err = parse_model(text).unwrap_err();
            assert_eq!(err.line, line, "{text:?}: {err}");
        }
        assert_eq!(parse_model("MINSUM1\n2\n").unwrap_err().line, 0);
    }

    #[test]
    fn trace_csv_layout() {
        let cps = [
            Checkpoint { normalized_iterations: 0.0, oracle_calls: 0, dual: 0.0, wall_time_ms: 0.5, primal: 5.0 },
            Checkpoint { normalized_iterations: 3.0, oracle_calls: 3, dual: 5.0, wall_time_ms: 1.0, primal: 5.0 },
        ];
        assert_eq!(trace_csv(&cps), format!("{TRACE_HEADER}\n0,0,0,0.5\n3,3,5,1\n"));
    }

    #[test]
    fn merged_csv_forward_fills() {
        let cp = |x: f64, d: f64| Checkpoint { normalized_iterations: x, oracle_calls: 0, dual: d, wall_time_ms: 0.0, primal: 0.0 };
        let m = [cp(0.0, 0.0), cp(2.0, 1.0), cp(4.0, 1.5)];
        let h = [cp(0.0, 0.0), cp(3.0, 2.0)];
        let csv = merged_csv(&[(Rule::Mplp, &m), (Rule::MplpPlusPlus, &h)]);
        assert_eq!(
            csv,
            "normalized_iterations,dual_m,dual_h\n0,0,0\n2,1,0\n3,1,2\n4,1.5,2\n"
        );
    }

    fn fuzz_model(seed: u64) -> GraphicalModel {
        let mut rng = SplitMix64::new(seed);
        let n = 1 + rng.next_index(6);
        let base = gen_complete(n, 1, seed);
        let unary: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let k = 1 + rng.next_index(4);
                (0..k).map(|_| (rng.next_f64() - 0.5) * 10f64.powi(rng.next_index(30) as i32 - 15)).collect()
            })
            .collect();
        let edges: Vec<(usize, usize)> = base.edges().iter().copied().filter(|_| rng.next_f64() < 0.6).collect();
        let tables = edges
            .iter()
            .map(|&(u, v)| {
                let (r, c) = (unary[u].len(), unary[v].len());
                Table::new(r, c, (0..r * c).map(|_| f64::from_bits(rng.next_u64() >> 2)).collect()).unwrap()
            })
            .collect();
        GraphicalModel::new(unary, edges, tables).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn serialize_then_parse_is_value_exact(seed in any::<u64>()) {
            let m = fuzz_model(seed);
            prop_assert_eq!(parse_model(&serialize_model(&m)).unwrap(), m);
        }
    }
}

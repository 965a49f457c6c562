//! Flat PRISM-language export of a built chain, and a reader for the subset
//! the exporter emits.
//!
//! The exported model has a single integer variable `s` ranging over state
//! ordinals, one guarded command per merged transition and one reward
//! structure `queue_<route>` per route that assigns the queue length.

use std::fmt::Write as _;

use super::generator::Generator;
use super::state::StateSpace;
use super::CtmcError;

#[derive(Debug, Clone, PartialEq)]
pub struct PrismMetadata {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub choice_rate: f64,
}

/// A chain read back from PRISM text.
#[derive(Debug, Clone, PartialEq)]
pub struct PrismModel {
    pub module: String,
    pub init: usize,
    pub generator: Generator,
    /// `(reward name, value per state)`.
    pub rewards: Vec<(String, Vec<f64>)>,
}

fn identifier(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    if out.is_empty() || out.starts_with(|c: char| c.is_ascii_digit()) {
        out.insert(0, 'j');
    }
    out
}

fn list(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn export_prism(space: &StateSpace, generator: &Generator, meta: &PrismMetadata) -> String {
    let junction = space.junction();
    let n = space.len();
    let mut out = String::new();
    let names: Vec<&str> = junction.routes.iter().map(|r| r.name.as_str()).collect();
    let _ = writeln!(out, "// junction: {}", junction.name);
    let _ = writeln!(out, "// routes: {}", names.join(", "));
    let pairs: Vec<String> = junction
        .conflicts
        .pairs()
        .iter()
        .map(|&(i, j)| format!("{}-{}", names[i], names[j]))
        .collect();
    let _ = writeln!(out, "// conflicts: {}", pairs.join(", "));
    let _ = writeln!(out, "// waiting slots m = {}", space.slots());
    let _ = writeln!(out, "// lambda = [{}]", list(&meta.lambda));
    let _ = writeln!(out, "// mu = [{}]", list(&meta.mu));
    let _ = writeln!(out, "// choice rate M = {}", meta.choice_rate);
    let _ = writeln!(out, "// states = {n}");
    out.push_str("\nctmc\n\n");
    let _ = writeln!(out, "module {}", identifier(&junction.name));
    let _ = writeln!(out, "  s : [0..{}] init {};", n.saturating_sub(1), space.root());
    out.push('\n');
    for u in 0..generator.dim() {
        for (v, r) in generator.row(u) {
            let _ = writeln!(out, "  [] s={u} -> {r} : (s'={v});");
        }
    }
    out.push_str("endmodule\n");
    for (i, name) in names.iter().enumerate() {
        let _ = writeln!(out, "\nrewards \"queue_{}\"", identifier(name));
        for (u, state) in space.states().iter().enumerate() {
            let q = state.queue(i);
            if q > 0 {
                let _ = writeln!(out, "  s={u} : {q};");
            }
        }
        out.push_str("endrewards\n");
    }
    out
}

fn parse_err(line: usize, msg: impl Into<String>) -> CtmcError {
    CtmcError::Prism {
        line,
        message: msg.into(),
    }
}

fn parse_guard(text: &str, line: usize) -> Result<usize, CtmcError> {
    let rest = text
        .trim()
        .strip_prefix("s=")
        .ok_or_else(|| parse_err(line, "expected guard `s=<n>`"))?;
    rest.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("bad state ordinal `{rest}`")))
}

pub fn parse_prism(text: &str) -> Result<PrismModel, CtmcError> {
    let mut module = None;
    let mut dim = None;
    let mut init = 0usize;
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut rewards: Vec<(String, Vec<f64>)> = Vec::new();
    let mut in_rewards = false;
    let mut seen_ctmc = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split("//").next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line == "ctmc" {
            seen_ctmc = true;
        } else if let Some(name) = line.strip_prefix("module ") {
            module = Some(name.trim().to_string());
        } else if line == "endmodule" || line == "endrewards" {
            in_rewards = false;
        } else if let Some(name) = line.strip_prefix("rewards ") {
            let n = dim.ok_or_else(|| parse_err(line_no, "rewards before variable declaration"))?;
            let name = name.trim().trim_matches('"').to_string();
            rewards.push((name, vec![0.0; n]));
            in_rewards = true;
        } else if in_rewards {
            let body = line
                .strip_suffix(';')
                .ok_or_else(|| parse_err(line_no, "missing `;`"))?;
            let (guard, value) = body
                .split_once(':')
                .ok_or_else(|| parse_err(line_no, "expected `guard : value`"))?;
            let u = parse_guard(guard, line_no)?;
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|_| parse_err(line_no, "bad reward value"))?;
            let store = &mut rewards.last_mut().unwrap().1;
            if u >= store.len() {
                return Err(parse_err(line_no, "reward state out of range"));
            }
            store[u] += v;
        } else if let Some(decl) = line.strip_prefix("s :") {
            // s : [0..N] init R;
            let decl = decl.trim().trim_end_matches(';');
            let (range, init_part) = decl
                .split_once("init")
                .ok_or_else(|| parse_err(line_no, "missing init"))?;
            let upper = range
                .trim()
                .strip_prefix("[0..")
                .and_then(|r| r.strip_suffix(']'))
                .ok_or_else(|| parse_err(line_no, "expected range `[0..N]`"))?;
            let upper: usize = upper
                .parse()
                .map_err(|_| parse_err(line_no, "bad range bound"))?;
            init = init_part
                .trim()
                .parse()
                .map_err(|_| parse_err(line_no, "bad init value"))?;
            dim = Some(upper + 1);
            rows = vec![Vec::new(); upper + 1];
        } else if let Some(cmd) = line.strip_prefix("[]") {
            let n = dim.ok_or_else(|| parse_err(line_no, "command before variable declaration"))?;
            let (guard, update) = cmd
                .split_once("->")
                .ok_or_else(|| parse_err(line_no, "expected `->`"))?;
            let u = parse_guard(guard, line_no)?;
            let update = update
                .trim()
                .strip_suffix(';')
                .ok_or_else(|| parse_err(line_no, "missing `;`"))?;
            let (rate, target) = update
                .split_once(':')
                .ok_or_else(|| parse_err(line_no, "expected `rate : (s'=v)`"))?;
            let rate: f64 = rate
                .trim()
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad rate `{}`", rate.trim())))?;
            let v: usize = target
                .trim()
                .strip_prefix("(s'=")
                .and_then(|t| t.strip_suffix(')'))
                .and_then(|t| t.trim().parse().ok())
                .ok_or_else(|| parse_err(line_no, "bad update"))?;
            if u >= n || v >= n {
                return Err(parse_err(line_no, "state ordinal out of range"));
            }
            rows[u].push((v, rate));
        } else {
            return Err(parse_err(line_no, format!("unrecognised line `{line}`")));
        }
    }
    if !seen_ctmc {
        return Err(parse_err(0, "missing `ctmc` model type"));
    }
    let module = module.ok_or_else(|| parse_err(0, "missing module"))?;
    if dim.is_none() {
        return Err(parse_err(0, "missing state variable"));
    }
    Ok(PrismModel {
        module,
        init,
        generator: Generator::from_rows(rows)?,
        rewards,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctmc::{build_generator, SpaceOptions};
    use crate::junction::{double_track_junction, Junction, RateSet};

    fn meta(rates: &RateSet) -> PrismMetadata {
        PrismMetadata {
            lambda: rates.lambda.clone(),
            mu: rates.mu.clone(),
            choice_rate: 600.0,
        }
    }

    #[test]
    fn single_route_model_has_four_commands() {
        let j = Junction::from_names("one route", &["r1"], &[]).unwrap();
        let space = StateSpace::build(&j, 1).unwrap();
        let rates = RateSet::markovian(vec![0.1], vec![0.2]).unwrap();
        let (g, _) = build_generator(&space, &rates, 600.0).unwrap();
        let text = export_prism(&space, &g, &meta(&rates));
        assert_eq!(text.lines().filter(|l| l.trim_start().starts_with("[]")).count(), 4);
        assert!(text.contains("module one_route"));
        assert!(text.contains("s : [0..2] init 0;"));
        assert!(text.contains("rewards \"queue_r1\"\n  s=2 : 1;\nendrewards"));
    }

    #[test]
    fn round_trip_reproduces_generator() {
        let j = double_track_junction();
        let space = StateSpace::build(&j, 2).unwrap();
        let rates =
            RateSet::markovian(vec![0.0833, 0.0667, 0.0833, 0.0667], vec![0.37, 0.37, 0.37, 0.37])
                .unwrap();
        let (g, _) = build_generator(&space, &rates, 600.0).unwrap();
        let text = export_prism(&space, &g, &meta(&rates));
        let parsed = parse_prism(&text).unwrap();
        assert_eq!(parsed.generator, g);
        assert_eq!(parsed.init, 0);
        assert_eq!(parsed.rewards.len(), 4);
        let q3: Vec<f64> = space.states().iter().map(|s| f64::from(s.queue(2))).collect();
        assert_eq!(parsed.rewards[2], ("queue_r3".to_string(), q3));
        // Deterministic text.
        assert_eq!(text, export_prism(&space, &g, &meta(&rates)));
    }

    #[test]
    fn empty_demand_exports_single_state() {
        let j = double_track_junction();
        let lambda = vec![0.0; 4];
        let space = StateSpace::build_with(&j, 5, &SpaceOptions::for_rates(&lambda)).unwrap();
        let rates = RateSet::markovian(lambda, vec![0.5; 4]).unwrap();
        let (g, _) = build_generator(&space, &rates, 600.0).unwrap();
        let text = export_prism(&space, &g, &meta(&rates));
        assert!(text.contains("s : [0..0] init 0;"));
        assert_eq!(parse_prism(&text).unwrap().generator.dim(), 1);
    }

    #[test]
    fn reader_reports_line_numbers() {
        let err = parse_prism("ctmc\nmodule m\n  s : [0..1] init 0;\n  [] s=0 -> x : (s'=1);\n")
            .unwrap_err();
        assert!(matches!(err, CtmcError::Prism { line: 4, .. }), "{err:?}");
    }
}

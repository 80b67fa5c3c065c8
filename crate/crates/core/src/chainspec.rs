//! JSON chain-spec files: the batch front door's input format.
//!
//! A spec names the states and provides a kernel, a transition rule, or
//! both (in which case they must agree exactly). All numbers are exact
//! rationals written `"p/q"` or `"k"`; decimal notation is rejected.
//! Validation reports the path of the first violated field.

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::chain::{Dist, Kernel, StateSpace};
use crate::error::{Error, Result};
use crate::order::Poset;
use crate::ratio::{parse_ratio, Q};
use crate::rule::{kernel_from_rule, TransitionRule};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChainSpec {
    states: Vec<String>,
    #[serde(default)]
    pi: Option<Vec<String>>,
    #[serde(default)]
    kernel: Option<Vec<Vec<String>>>,
    #[serde(default)]
    rule: Option<RawRule>,
    #[serde(default)]
    poset: Option<RawPoset>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    labels: Vec<String>,
    mu: Vec<String>,
    /// label -> image of each state, in state order
    table: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPoset {
    relations: Vec<(String, String)>,
    bottom: String,
    top: String,
}

/// A validated chain description.
#[derive(Debug, Clone)]
pub struct ChainSpec {
    pub space: StateSpace,
    /// Stationary law if given in the file; otherwise solved on demand.
    pub pi: Option<Dist>,
    pub kernel: Kernel,
    pub rule: Option<TransitionRule>,
    pub poset: Option<Poset>,
}

impl ChainSpec {
    /// The stationary law: the one from the file, or solved from the kernel.
    pub fn resolved_pi(&self) -> Result<Dist> {
        match &self.pi {
            Some(pi) => Ok(pi.clone()),
            None => crate::chain::solve_stationary(&self.kernel),
        }
    }
}

fn ratio_at(path: String, text: &str) -> Result<Q> {
    parse_ratio(text).map_err(|m| Error::validation(path, m))
}

/// Parses and validates a chain-spec document.
pub fn parse_chain_spec(text: &str) -> Result<ChainSpec> {
    let raw: RawChainSpec =
        serde_json::from_str(text).map_err(|e| Error::ParseError(e.to_string()))?;

    if raw.states.is_empty() {
        return Err(Error::validation("states", "must be nonempty"));
    }
    let space = StateSpace::new(raw.states.clone())
        .map_err(|e| Error::validation("states", e.to_string()))?;
    let n = space.len();

    let pi = match &raw.pi {
        None => None,
        Some(entries) => {
            if entries.len() != n {
                return Err(Error::validation("pi", "length differs from states"));
            }
            let w: Vec<Q> = entries
                .iter()
                .enumerate()
                .map(|(i, t)| ratio_at(format!("pi[{i}]"), t))
                .collect::<Result<_>>()?;
            Some(Dist::new(w).map_err(|e| Error::validation("pi", e.to_string()))?)
        }
    };

    let kernel = match &raw.kernel {
        None => None,
        Some(rows) => {
            if rows.len() != n {
                return Err(Error::validation("kernel", "row count differs from states"));
            }
            let parsed: Vec<Dist> = rows
                .iter()
                .enumerate()
                .map(|(i, row)| {
                    if row.len() != n {
                        return Err(Error::validation(
                            format!("kernel[{i}]"),
                            "column count differs from states",
                        ));
                    }
                    let w: Vec<Q> = row
                        .iter()
                        .enumerate()
                        .map(|(j, t)| ratio_at(format!("kernel[{i}][{j}]"), t))
                        .collect::<Result<_>>()?;
                    Dist::new(w).map_err(|e| Error::validation(format!("kernel[{i}]"), e.to_string()))
                })
                .collect::<Result<_>>()?;
            Some(Kernel::new(parsed).expect("square by construction"))
        }
    };

    let rule = match &raw.rule {
        None => None,
        Some(r) => {
            if r.labels.len() != r.mu.len() {
                return Err(Error::validation("rule.mu", "length differs from labels"));
            }
            let mu: Vec<Q> = r
                .mu
                .iter()
                .enumerate()
                .map(|(i, t)| ratio_at(format!("rule.mu[{i}]"), t))
                .collect::<Result<_>>()?;
            let mut maps = Vec::with_capacity(r.labels.len());
            for label in &r.labels {
                let images = r.table.get(label).ok_or_else(|| {
                    Error::validation(format!("rule.table.{label}"), "missing label entry")
                })?;
                if images.len() != n {
                    return Err(Error::validation(
                        format!("rule.table.{label}"),
                        "image count differs from states",
                    ));
                }
                let map: Vec<usize> = images
                    .iter()
                    .enumerate()
                    .map(|(j, s)| {
                        space.index_of(s).ok_or_else(|| {
                            Error::validation(
                                format!("rule.table.{label}[{j}]"),
                                format!("unknown state `{s}`"),
                            )
                        })
                    })
                    .collect::<Result<_>>()?;
                maps.push(map);
            }
            if let Some(extra) = r.table.keys().find(|k| !r.labels.contains(k)) {
                return Err(Error::validation(
                    format!("rule.table.{extra}"),
                    "entry does not match any label",
                ));
            }
            Some(
                TransitionRule::new(n, r.labels.clone(), mu, maps)
                    .map_err(|e| Error::validation("rule", e.to_string()))?,
            )
        }
    };

    let kernel = match (kernel, &rule) {
        (Some(k), Some(r)) => {
            if kernel_from_rule(r) != k {
                return Err(Error::validation(
                    "rule",
                    "rule does not reproduce the kernel",
                ));
            }
            k
        }
        (Some(k), None) => k,
        (None, Some(r)) => kernel_from_rule(r),
        (None, None) => {
            return Err(Error::validation(
                "kernel",
                "at least one of kernel or rule is required",
            ));
        }
    };

    if let Some(pi) = &pi {
        if &kernel.apply(pi) != pi {
            return Err(Error::validation("pi", "not stationary for the kernel"));
        }
    }

    let poset = match &raw.poset {
        None => None,
        Some(p) => {
            let mut relations = Vec::with_capacity(p.relations.len());
            for (i, (a, b)) in p.relations.iter().enumerate() {
                let ia = space.index_of(a).ok_or_else(|| {
                    Error::validation(format!("poset.relations[{i}]"), format!("unknown state `{a}`"))
                })?;
                let ib = space.index_of(b).ok_or_else(|| {
                    Error::validation(format!("poset.relations[{i}]"), format!("unknown state `{b}`"))
                })?;
                relations.push((ia, ib));
            }
            let built = Poset::from_relations(n, &relations)
                .map_err(|e| Error::validation("poset", e.to_string()))?;
            let bottom = space.index_of(&p.bottom).ok_or_else(|| {
                Error::validation("poset.bottom", format!("unknown state `{}`", p.bottom))
            })?;
            let top = space.index_of(&p.top).ok_or_else(|| {
                Error::validation("poset.top", format!("unknown state `{}`", p.top))
            })?;
            if built.bottom() != bottom {
                return Err(Error::validation(
                    "poset.bottom",
                    "declared bottom is not the least element of the closure",
                ));
            }
            if built.top() != top {
                return Err(Error::validation(
                    "poset.top",
                    "declared top is not the greatest element of the closure",
                ));
            }
            Some(built)
        }
    };

    Ok(ChainSpec {
        space,
        pi,
        kernel,
        rule,
        poset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::q;

    const WALK: &str = r#"{
        "states": ["0", "1", "2"],
        "pi": ["1/3", "1/3", "1/3"],
        "kernel": [
            ["1/2", "1/2", "0"],
            ["1/2", "0", "1/2"],
            ["0", "1/2", "1/2"]
        ],
        "rule": {
            "labels": ["down", "up"],
            "mu": ["1/2", "1/2"],
            "table": {
                "down": ["0", "0", "1"],
                "up": ["1", "2", "2"]
            }
        },
        "poset": {
            "relations": [["0", "1"], ["1", "2"]],
            "bottom": "0",
            "top": "2"
        }
    }"#;

    #[test]
    fn parses_the_walk_spec() {
        let spec = parse_chain_spec(WALK).unwrap();
        assert_eq!(spec.space.len(), 3);
        assert_eq!(spec.kernel, crate::testutil::lazy_walk_kernel());
        assert_eq!(spec.rule.unwrap(), crate::testutil::two_map_rule());
        assert_eq!(spec.poset.unwrap(), Poset::total_order(3));
        assert_eq!(spec.pi.unwrap().weights(), &[q(1, 3), q(1, 3), q(1, 3)]);
    }

    #[test]
    fn kernel_is_derived_from_rule_when_absent() {
        let text = r#"{
            "states": ["a", "b"],
            "rule": {
                "labels": ["swap"],
                "mu": ["1"],
                "table": { "swap": ["b", "a"] }
            }
        }"#;
        let spec = parse_chain_spec(text).unwrap();
        assert_eq!(spec.kernel.get(0, 1), &q(1, 1));
        assert_eq!(spec.resolved_pi().unwrap(), Dist::uniform(2));
    }

    #[test]
    fn empty_states_are_rejected() {
        let err = parse_chain_spec(r#"{ "states": [] }"#).unwrap_err();
        assert_eq!(
            err,
            Error::validation("states", "must be nonempty")
        );
    }

    #[test]
    fn decimals_are_rejected_with_a_path() {
        let text = r#"{
            "states": ["0", "1"],
            "kernel": [["0.333", "0.667"], ["1", "0"]]
        }"#;
        match parse_chain_spec(text).unwrap_err() {
            Error::ValidationError { path, .. } => assert_eq!(path, "kernel[0][0]"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn mismatched_rule_and_kernel_are_rejected() {
        let text = r#"{
            "states": ["0", "1"],
            "kernel": [["1", "0"], ["0", "1"]],
            "rule": {
                "labels": ["swap"],
                "mu": ["1"],
                "table": { "swap": ["1", "0"] }
            }
        }"#;
        match parse_chain_spec(text).unwrap_err() {
            Error::ValidationError { path, .. } => assert_eq!(path, "rule"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn unknown_state_in_table_is_located() {
        let text = r#"{
            "states": ["0", "1"],
            "rule": {
                "labels": ["u"],
                "mu": ["1"],
                "table": { "u": ["0", "9"] }
            }
        }"#;
        match parse_chain_spec(text).unwrap_err() {
            Error::ValidationError { path, .. } => assert_eq!(path, "rule.table.u[1]"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn nonstationary_pi_is_rejected() {
        let text = r#"{
            "states": ["0", "1"],
            "pi": ["1/4", "3/4"],
            "kernel": [["1/2", "1/2"], ["1/2", "1/2"]]
        }"#;
        match parse_chain_spec(text).unwrap_err() {
            Error::ValidationError { path, .. } => assert_eq!(path, "pi"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn missing_both_kernel_and_rule_is_rejected() {
        let err = parse_chain_spec(r#"{ "states": ["0"] }"#).unwrap_err();
        match err {
            Error::ValidationError { path, .. } => assert_eq!(path, "kernel"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(
            parse_chain_spec("{"),
            Err(Error::ParseError(_))
        ));
    }
}

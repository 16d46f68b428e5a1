//! JSON description of catalog functions.
//!
//! ```json
//! {"kind": "group_l2", "sizes": [5, 5, 5]}
//! {"kind": "graph_l1", "n": 4, "edges": [[0, 1], [1, 2], [2, 3]]}
//! {"kind": "scaled", "weight": 0.01, "inner": {"kind": "l1", "n": 50}}
//! ```
//!
//! An edge `[i, j]` contributes the row `x_j − x_i` to the incidence
//! matrix.

use serde::{Deserialize, Serialize};

use super::catalog::{self, Group};
use super::{QsError, QsFunction};
use crate::linops::Csr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QsSpec {
    L1 {
        n: usize,
    },
    L2 {
        n: usize,
    },
    Linf {
        n: usize,
    },
    Quadratic {
        n: usize,
    },
    L1Ball {
        n: usize,
    },
    OrthantDistance {
        n: usize,
    },
    Tv1d {
        n: usize,
    },
    GroupL2 {
        sizes: Vec<usize>,
    },
    SumOfNorms {
        n: usize,
        groups: Vec<Group>,
    },
    GraphL1 {
        n: usize,
        edges: Vec<(usize, usize)>,
    },
    /// Indicator of `{x : x_i ≥ x_j for every edge (i, j)}`.
    MonotoneCone {
        n: usize,
        edges: Vec<(usize, usize)>,
    },
    IsotropicTv {
        n: usize,
        edges: Vec<(usize, usize)>,
        groups: Vec<Vec<usize>>,
    },
    Scaled {
        weight: f64,
        inner: Box<QsSpec>,
    },
}

fn incidence(n: usize, edges: &[(usize, usize)]) -> Result<Csr, QsError> {
    let trip: Vec<_> = edges
        .iter()
        .enumerate()
        .flat_map(|(r, &(i, j))| [(r, i, -1.0), (r, j, 1.0)])
        .collect();
    if edges.iter().any(|&(i, j)| i == j) {
        return Err(QsError::Partition("self-loop in edge list".into()));
    }
    Ok(Csr::from_triplets(edges.len(), n, &trip)?)
}

impl QsSpec {
    pub fn build(&self) -> Result<QsFunction, QsError> {
        match self {
            QsSpec::L1 { n } => catalog::build_l1(*n),
            QsSpec::L2 { n } => catalog::build_l2(*n),
            QsSpec::Linf { n } => catalog::build_linf(*n),
            QsSpec::Quadratic { n } => catalog::build_quadratic(*n),
            QsSpec::L1Ball { n } => catalog::build_l1_ball(*n),
            QsSpec::OrthantDistance { n } => catalog::build_orthant_distance(*n),
            QsSpec::Tv1d { n } => catalog::build_tv_1d(*n),
            QsSpec::GroupL2 { sizes } => catalog::build_group_l2(sizes),
            QsSpec::SumOfNorms { n, groups } => catalog::build_sum_of_norms(*n, groups),
            QsSpec::GraphL1 { n, edges } => catalog::build_graph_l1(&incidence(*n, edges)?),
            QsSpec::MonotoneCone { n, edges } => {
                catalog::build_cone_indicator(&incidence(*n, edges)?)
            }
            QsSpec::IsotropicTv { n, edges, groups } => {
                catalog::build_isotropic_tv(&incidence(*n, edges)?, groups)
            }
            QsSpec::Scaled { weight, inner } => inner.build()?.scaled(*weight),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qscalc::NormKind;

    #[test]
    fn round_trip() {
        let specs = vec![
            QsSpec::L1 { n: 3 },
            QsSpec::GroupL2 { sizes: vec![2, 3] },
            QsSpec::SumOfNorms {
                n: 3,
                groups: vec![Group {
                    indices: vec![0, 2],
                    norm: NormKind::LInf,
                }],
            },
            QsSpec::GraphL1 {
                n: 3,
                edges: vec![(0, 1), (1, 2)],
            },
            QsSpec::Scaled {
                weight: 0.5,
                inner: Box::new(QsSpec::Tv1d { n: 4 }),
            },
        ];
        for s in specs {
            let back = QsSpec::from_json(&s.to_json()).unwrap();
            assert_eq!(back, s);
            back.build().unwrap();
        }
    }

    #[test]
    fn parses_documented_forms() {
        let s = QsSpec::from_json(
            r#"{"kind": "scaled", "weight": 0.01, "inner": {"kind": "l1", "n": 50}}"#,
        )
        .unwrap();
        let g = s.build().unwrap();
        assert!((g.value(&[1.0; 50]).unwrap() - 0.5).abs() < 1e-12);
        let s = QsSpec::from_json(r#"{"kind": "graph_l1", "n": 3, "edges": [[0, 1], [1, 2]]}"#)
            .unwrap();
        assert!((s.build().unwrap().value(&[1.0, 3.0, 2.0]).unwrap() - 3.0).abs() < 1e-12);
        assert!(QsSpec::from_json(r#"{"kind": "nope"}"#).is_err());
        assert!(QsSpec::GraphL1 {
            n: 2,
            edges: vec![(1, 1)]
        }
        .build()
        .is_err());
    }
}

//! Generated datasets with known structure, used as test fixtures.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataio::{DatasetBundle, DatasetMeta};
use crate::error::{Error, Result};
use crate::hetgraph::{HeteroGraph, NodeType, Relation};
use crate::sparse::{CsrMatrix, DenseMatrix};
use crate::train::Splits;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureKind {
    /// Two classes of items. Items share `group` nodes only within their
    /// class (meta-path IGI, homophily 1) and `tag` nodes only across
    /// classes (meta-path ITI, homophily 0).
    Mixed,
    /// The group half of [`FixtureKind::Mixed`] alone.
    Homophilic,
    /// Every item has the same label.
    Uniform,
    /// Four items labeled 0,0,1,1 chained by three link nodes 0-1, 1-2, 2-3.
    Chain,
}

impl FixtureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FixtureKind::Mixed => "mixed",
            FixtureKind::Homophilic => "homophilic",
            FixtureKind::Uniform => "uniform",
            FixtureKind::Chain => "chain",
        }
    }

    /// Meta-path specs valid on the generated graph.
    pub fn metapaths(self) -> &'static [&'static str] {
        match self {
            FixtureKind::Mixed => &["IGI", "ITI"],
            FixtureKind::Homophilic | FixtureKind::Uniform => &["IGI"],
            FixtureKind::Chain => &["ILI"],
        }
    }
}

impl fmt::Display for FixtureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FixtureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixed" => Ok(FixtureKind::Mixed),
            "homophilic" => Ok(FixtureKind::Homophilic),
            "uniform" => Ok(FixtureKind::Uniform),
            "chain" => Ok(FixtureKind::Chain),
            other => Err(Error::Argument(format!(
                "unknown fixture `{other}` (expected mixed, homophilic, uniform or chain)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub kind: FixtureKind,
    /// Target (item) nodes; ignored by [`FixtureKind::Chain`].
    pub nodes: usize,
    pub feature_dim: usize,
    /// Distance of each class mean from the origin along a random unit direction.
    pub signal: f64,
    /// Items per group.
    pub group_size: usize,
    /// Groups and tags each item joins.
    pub memberships: usize,
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            kind: FixtureKind::Mixed,
            nodes: 200,
            feature_dim: 16,
            signal: 0.8,
            group_size: 5,
            memberships: 2,
            seed: 0,
        }
    }
}

fn incidence(rows: usize, cols: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<CsrMatrix> {
    CsrMatrix::from_triplets(rows, cols, pairs.into_iter().map(|(i, j)| (i, j, 1.0)))
}

/// Shuffled 24/6/70 split over all items.
fn standard_split(n: usize, rng: &mut ChaCha8Rng) -> Splits {
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(rng);
    let n_train = (n as f64 * 0.24).round() as usize;
    let n_val = (n as f64 * 0.06).round().max(1.0) as usize;
    let sorted = |s: &[usize]| {
        let mut v = s.to_vec();
        v.sort_unstable();
        v
    };
    Splits {
        train: sorted(&ids[..n_train]),
        val: sorted(&ids[n_train..n_train + n_val]),
        test: sorted(&ids[n_train + n_val..]),
    }
}

fn features(labels: &[usize], spec: &FixtureSpec, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let d = spec.feature_dim;
    let mut dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    dir.iter_mut().for_each(|v| *v /= norm);
    let mut x = DenseMatrix::zeros(labels.len(), d);
    for (i, &y) in labels.iter().enumerate() {
        let sign = if y == 0 { -1.0 } else { 1.0 };
        for (j, u) in dir.iter().enumerate() {
            let noise: f64 = StandardNormal.sample(rng);
            // Round-trips exactly through the f32 feature format.
            x.set(i, j, (sign * spec.signal * u + noise) as f32 as f64);
        }
    }
    x
}

/// Items of each class, each class split into blocks of `size`, repeated
/// `rounds` times with fresh shuffles. Returns (block, item) pairs.
fn class_blocks(by_class: &[Vec<usize>], size: usize, rounds: usize, rng: &mut ChaCha8Rng) -> (usize, Vec<(usize, usize)>) {
    let mut pairs = Vec::new();
    let mut blocks = 0;
    for _ in 0..rounds {
        for members in by_class {
            let mut m = members.clone();
            m.shuffle(rng);
            for chunk in m.chunks(size) {
                pairs.extend(chunk.iter().map(|&i| (blocks, i)));
                blocks += 1;
            }
        }
    }
    (blocks, pairs)
}

/// Tags joining one item of class 0 with one of class 1, `rounds` times.
fn cross_pairs(by_class: &[Vec<usize>], rounds: usize, rng: &mut ChaCha8Rng) -> (usize, Vec<(usize, usize)>) {
    let mut pairs = Vec::new();
    let mut tags = 0;
    for _ in 0..rounds {
        let mut a = by_class[0].clone();
        let mut b = by_class[1].clone();
        a.shuffle(rng);
        b.shuffle(rng);
        for (&i, &j) in a.iter().zip(&b) {
            pairs.push((tags, i));
            pairs.push((tags, j));
            tags += 1;
        }
    }
    (tags, pairs)
}

fn bundle(
    name: &str,
    mut node_types: Vec<NodeType>,
    relations: Vec<(&str, &str, usize, Vec<(usize, usize)>)>,
    labels: Vec<usize>,
    num_classes: usize,
    feats: DenseMatrix,
    splits: Splits,
) -> Result<DatasetBundle> {
    let n = labels.len();
    node_types.insert(0, NodeType { name: "item".into(), count: n });
    let rels = relations
        .into_iter()
        .map(|(rname, dst, count, pairs)| {
            Ok(Relation {
                name: rname.into(),
                src: "item".into(),
                dst: dst.into(),
                matrix: incidence(n, count, pairs.into_iter().map(|(b, i)| (i, b)))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let graph = HeteroGraph::new(
        node_types,
        rels,
        "item",
        feats,
        labels.into_iter().map(Some).collect(),
        num_classes,
    )?;
    DatasetBundle::new(
        graph,
        splits,
        DatasetMeta {
            name: name.into(),
            target_type: "item".into(),
            class_names: (0..num_classes).map(|c| format!("class{c}")).collect(),
        },
    )
}

pub fn make_fixture(spec: &FixtureSpec) -> Result<DatasetBundle> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    if spec.kind == FixtureKind::Chain {
        let labels = vec![0, 0, 1, 1];
        let links = vec![(0, 0), (0, 1), (1, 1), (1, 2), (2, 2), (2, 3)];
        let feats = features(&labels, &FixtureSpec { feature_dim: spec.feature_dim.max(1), ..spec.clone() }, &mut rng);
        let splits = Splits { train: vec![0, 2], val: vec![1], test: vec![3] };
        return bundle(
            "chain",
            vec![NodeType { name: "link".into(), count: 3 }],
            vec![("IL", "link", 3, links)],
            labels,
            2,
            feats,
            splits,
        );
    }
    if spec.nodes < 20 || spec.nodes % 2 != 0 {
        return Err(Error::Argument(format!(
            "fixture needs an even node count of at least 20, got {}",
            spec.nodes
        )));
    }
    if spec.group_size < 2 || spec.memberships == 0 || spec.feature_dim == 0 {
        return Err(Error::Argument("group_size >= 2, memberships >= 1 and feature_dim >= 1 required".into()));
    }
    let n = spec.nodes;
    let labels: Vec<usize> = if spec.kind == FixtureKind::Uniform {
        vec![0; n]
    } else {
        (0..n).map(|i| i % 2).collect()
    };
    let num_classes = if spec.kind == FixtureKind::Uniform { 1 } else { 2 };
    let by_class: Vec<Vec<usize>> = (0..num_classes)
        .map(|c| (0..n).filter(|&i| labels[i] == c).collect())
        .collect();

    let (groups, group_pairs) = class_blocks(&by_class, spec.group_size, spec.memberships, &mut rng);
    let mut types = vec![NodeType { name: "group".into(), count: groups }];
    let mut rels = vec![("IG", "group", groups, group_pairs)];
    if spec.kind == FixtureKind::Mixed {
        let (tags, tag_pairs) = cross_pairs(&by_class, spec.memberships, &mut rng);
        types.push(NodeType { name: "tag".into(), count: tags });
        rels.push(("IT", "tag", tags, tag_pairs));
    }
    let feats = features(&labels, spec, &mut rng);
    let splits = standard_split(n, &mut rng);
    bundle(spec.kind.as_str(), types, rels, labels, num_classes, feats, splits)
}

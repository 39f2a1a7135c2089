//! Heterogeneous graphs, meta-path subgraph induction and edge homophily.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{spgemm, sym_normalize, CsrMatrix, DenseMatrix};

/// Suffix under which the transpose of every relation is registered.
pub const REVERSE_SUFFIX: &str = "_rev";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeType {
    pub name: String,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Relation {
    pub name: String,
    pub src: String,
    pub dst: String,
    pub matrix: CsrMatrix,
}

#[derive(Clone, Debug)]
pub struct HeteroGraph {
    node_types: Vec<NodeType>,
    relations: Vec<Relation>,
    target_type: String,
    features: DenseMatrix,
    labels: Vec<Option<usize>>,
    num_classes: usize,
}

impl HeteroGraph {
    pub fn new(
        node_types: Vec<NodeType>,
        relations: Vec<Relation>,
        target_type: impl Into<String>,
        features: DenseMatrix,
        labels: Vec<Option<usize>>,
        num_classes: usize,
    ) -> Result<Self> {
        let g = Self {
            node_types,
            relations,
            target_type: target_type.into(),
            features,
            labels,
            num_classes,
        };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        for (i, t) in self.node_types.iter().enumerate() {
            if self.node_types[..i].iter().any(|o| o.name == t.name) {
                return Err(Error::Schema(format!("duplicate node type `{}`", t.name)));
            }
        }
        for (i, r) in self.relations.iter().enumerate() {
            if self.relations[..i].iter().any(|o| o.name == r.name) {
                return Err(Error::Schema(format!("duplicate relation `{}`", r.name)));
            }
            let expect = (self.type_count(&r.src)?, self.type_count(&r.dst)?);
            if r.matrix.shape() != expect {
                return Err(Error::Schema(format!(
                    "relation `{}` has shape {:?}, expected {:?} from its endpoint types",
                    r.name,
                    r.matrix.shape(),
                    expect
                )));
            }
        }
        let n = self.type_count(&self.target_type)?;
        if self.features.n_rows() != n {
            return Err(Error::Schema(format!(
                "features have {} rows but target type `{}` has {n} nodes",
                self.features.n_rows(),
                self.target_type
            )));
        }
        if self.labels.len() != n {
            return Err(Error::Schema(format!(
                "{} labels for {n} target nodes",
                self.labels.len()
            )));
        }
        if let Some((i, c)) = self
            .labels
            .iter()
            .enumerate()
            .find_map(|(i, l)| l.filter(|&c| c >= self.num_classes).map(|c| (i, c)))
        {
            return Err(Error::Schema(format!(
                "label {c} of node {i} outside [0, {})",
                self.num_classes
            )));
        }
        Ok(())
    }

    /// Registers `<name>_rev = Aᵀ` for every relation that lacks one.
    pub fn with_reverse_relations(mut self) -> Self {
        let extra: Vec<Relation> = self
            .relations
            .iter()
            .filter(|r| !r.name.ends_with(REVERSE_SUFFIX))
            .map(|r| Relation {
                name: format!("{}{REVERSE_SUFFIX}", r.name),
                src: r.dst.clone(),
                dst: r.src.clone(),
                matrix: r.matrix.transpose(),
            })
            .filter(|r| self.relation(&r.name).is_err())
            .collect();
        self.relations.extend(extra);
        self
    }

    pub fn node_types(&self) -> &[NodeType] {
        &self.node_types
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn target_type(&self) -> &str {
        &self.target_type
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn features_mut(&mut self) -> &mut DenseMatrix {
        &mut self.features
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_targets(&self) -> usize {
        self.features.n_rows()
    }

    pub fn type_count(&self, name: &str) -> Result<usize> {
        self.node_types
            .iter()
            .find(|t| t.name == name)
            .map(|t| t.count)
            .ok_or_else(|| Error::Lookup {
                kind: "node type",
                name: name.to_string(),
            })
    }

    pub fn relation(&self, name: &str) -> Result<&Relation> {
        self.relations
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| Error::Lookup {
                kind: "relation",
                name: name.to_string(),
            })
    }

    pub fn total_nodes(&self) -> usize {
        self.node_types.iter().map(|t| t.count).sum()
    }

    /// Labels with unlabeled nodes replaced by `usize::MAX`; only meaningful
    /// on nodes that are known to be labeled.
    pub fn dense_labels(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.unwrap_or(usize::MAX)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaPath {
    pub name: String,
    pub relation_seq: Vec<String>,
}

impl MetaPath {
    pub fn new(name: impl Into<String>, relation_seq: Vec<String>) -> Self {
        Self {
            name: name.into(),
            relation_seq,
        }
    }

    /// Parses either `NAME=rel1,rel2,...` or a string of node-type
    /// abbreviations such as `PAP`.
    ///
    /// An abbreviation matches a node type whose name equals it or starts
    /// with it (case-insensitive). Between consecutive types the unique
    /// forward relation is used, falling back to a unique `_rev` relation.
    pub fn parse(spec: &str, graph: &HeteroGraph) -> Result<Self> {
        if let Some((name, rels)) = spec.split_once('=') {
            let seq: Vec<String> = rels
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect();
            let mp = MetaPath::new(name.trim(), seq);
            mp.validate(graph)?;
            return Ok(mp);
        }
        let types: Vec<&NodeType> = spec
            .chars()
            .map(|c| resolve_type(graph, c))
            .collect::<Result<_>>()?;
        if types.len() < 2 {
            return Err(Error::Schema(format!(
                "meta-path `{spec}` needs at least two node types"
            )));
        }
        let seq = types
            .windows(2)
            .map(|w| resolve_relation(graph, &w[0].name, &w[1].name))
            .collect::<Result<Vec<_>>>()?;
        let mp = MetaPath::new(spec, seq);
        mp.validate(graph)?;
        Ok(mp)
    }

    /// Checks relation existence, composability and that both endpoints are
    /// the target type.
    pub fn validate(&self, graph: &HeteroGraph) -> Result<()> {
        let rels = self
            .relation_seq
            .iter()
            .map(|n| graph.relation(n))
            .collect::<Result<Vec<_>>>()?;
        let (first, last) = match (rels.first(), rels.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => {
                return Err(Error::Schema(format!(
                    "meta-path `{}` has no relations",
                    self.name
                )))
            }
        };
        for w in rels.windows(2) {
            if w[0].dst != w[1].src {
                return Err(Error::Schema(format!(
                    "meta-path `{}`: `{}` ends at `{}` but `{}` starts at `{}`",
                    self.name, w[0].name, w[0].dst, w[1].name, w[1].src
                )));
            }
        }
        if first.src != graph.target_type || last.dst != graph.target_type {
            return Err(Error::Schema(format!(
                "meta-path `{}` runs {} -> {}, both ends must be the target type `{}`",
                self.name, first.src, last.dst, graph.target_type
            )));
        }
        Ok(())
    }
}

fn resolve_type(graph: &HeteroGraph, abbrev: char) -> Result<&NodeType> {
    let a = abbrev.to_ascii_lowercase();
    let hits: Vec<&NodeType> = graph
        .node_types
        .iter()
        .filter(|t| t.name.chars().next().map(|c| c.to_ascii_lowercase()) == Some(a))
        .collect();
    match hits.as_slice() {
        [t] => Ok(t),
        [] => Err(Error::Lookup {
            kind: "node type abbreviation",
            name: abbrev.to_string(),
        }),
        _ => Err(Error::Schema(format!(
            "node type abbreviation `{abbrev}` is ambiguous"
        ))),
    }
}

fn resolve_relation(graph: &HeteroGraph, src: &str, dst: &str) -> Result<String> {
    let between = |rev: bool| -> Vec<&Relation> {
        graph
            .relations
            .iter()
            .filter(|r| r.src == src && r.dst == dst && r.name.ends_with(REVERSE_SUFFIX) == rev)
            .collect()
    };
    let forward = between(false);
    let candidates = if forward.is_empty() {
        between(true)
    } else {
        forward
    };
    match candidates.as_slice() {
        [r] => Ok(r.name.clone()),
        [] => Err(Error::Schema(format!("no relation from `{src}` to `{dst}`"))),
        many => Err(Error::Schema(format!(
            "several relations from `{src}` to `{dst}` ({}); name them explicitly",
            many.iter()
                .map(|r| r.name.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        ))),
    }
}

/// Left-to-right product of the meta-path's relation matrices. Entry (i, j)
/// counts path instances from target i to target j.
pub fn induce_metapath_adjacency(graph: &HeteroGraph, path: &MetaPath) -> Result<CsrMatrix> {
    path.validate(graph)?;
    let mut it = path.relation_seq.iter();
    let first = it.next().expect("validated non-empty");
    let mut acc = graph.relation(first)?.matrix.clone();
    for name in it {
        acc = spgemm(&acc, &graph.relation(name)?.matrix)?;
    }
    Ok(acc)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgraphOptions {
    pub binarize: bool,
    pub drop_selfloops: bool,
}

impl Default for SubgraphOptions {
    fn default() -> Self {
        Self {
            binarize: false,
            drop_selfloops: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MetaPathSubgraph {
    pub path: MetaPath,
    /// Path-instance counts, before self-loop removal or binarization.
    pub raw_adj: CsrMatrix,
    pub norm_adj: CsrMatrix,
}

impl MetaPathSubgraph {
    /// Wraps an already-normalized adjacency, e.g. for synthetic operators.
    pub fn from_normalized(path: MetaPath, norm_adj: CsrMatrix) -> Self {
        Self {
            path,
            raw_adj: norm_adj.clone(),
            norm_adj,
        }
    }

    /// The adjacency after self-loop removal and binarization, before
    /// normalization.
    pub fn processed_adj(&self, opts: SubgraphOptions) -> CsrMatrix {
        process(&self.raw_adj, opts)
    }
}

fn process(raw: &CsrMatrix, opts: SubgraphOptions) -> CsrMatrix {
    let mut m = if opts.drop_selfloops {
        raw.without_diagonal()
    } else {
        raw.clone()
    };
    if opts.binarize {
        m = m.binarized();
    }
    m
}

pub fn build_subgraph(
    graph: &HeteroGraph,
    path: &MetaPath,
    opts: SubgraphOptions,
) -> Result<MetaPathSubgraph> {
    let raw_adj = induce_metapath_adjacency(graph, path)?;
    let norm_adj = sym_normalize(&process(&raw_adj, opts))?;
    Ok(MetaPathSubgraph {
        path: path.clone(),
        raw_adj,
        norm_adj,
    })
}

fn check_homophily_input(adj: &CsrMatrix, labels: &[usize]) -> Result<()> {
    if !adj.is_square() {
        return Err(Error::Shape(format!(
            "homophily needs a square adjacency, got {:?}",
            adj.shape()
        )));
    }
    if labels.len() != adj.n_rows() {
        return Err(Error::Shape(format!(
            "{} labels for {} nodes",
            labels.len(),
            adj.n_rows()
        )));
    }
    Ok(())
}

/// Fraction of stored off-diagonal entries whose endpoints share a label.
/// Each stored entry counts once, so a symmetric pattern counts both
/// directions.
pub fn edge_homophily(adj: &CsrMatrix, labels: &[usize]) -> Result<f64> {
    check_homophily_input(adj, labels)?;
    let (mut same, mut total) = (0u64, 0u64);
    for (u, v, _) in adj.iter().filter(|&(u, v, _)| u != v) {
        total += 1;
        same += u64::from(labels[u] == labels[v]);
    }
    if total == 0 {
        return Err(Error::UndefinedHomophily);
    }
    Ok(same as f64 / total as f64)
}

/// Variant of [`edge_homophily`] where each entry is weighted by its value,
/// i.e. by path-instance count on raw meta-path adjacencies.
pub fn weighted_edge_homophily(adj: &CsrMatrix, labels: &[usize]) -> Result<f64> {
    check_homophily_input(adj, labels)?;
    let (mut same, mut total) = (0.0, 0.0);
    for (u, v, w) in adj.iter().filter(|&(u, v, _)| u != v) {
        total += w;
        if labels[u] == labels[v] {
            same += w;
        }
    }
    if total == 0.0 {
        return Err(Error::UndefinedHomophily);
    }
    Ok(same / total)
}

/// Homophily restricted to edges whose endpoints are both labeled.
pub fn labeled_edge_homophily(
    adj: &CsrMatrix,
    labels: &[Option<usize>],
    weighted: bool,
) -> Result<f64> {
    let keep = adj.filter(|u, v, _| labels[u].is_some() && labels[v].is_some());
    let dense: Vec<usize> = labels.iter().map(|l| l.unwrap_or(usize::MAX)).collect();
    if weighted {
        weighted_edge_homophily(&keep, &dense)
    } else {
        edge_homophily(&keep, &dense)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csr(rows: &[&[f64]]) -> CsrMatrix {
        CsrMatrix::from_dense(&DenseMatrix::from_rows(rows))
    }

    /// 2 authors (target), 3 papers.
    fn toy() -> HeteroGraph {
        let ap = csr(&[&[1.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        HeteroGraph::new(
            vec![
                NodeType {
                    name: "author".into(),
                    count: 2,
                },
                NodeType {
                    name: "paper".into(),
                    count: 3,
                },
            ],
            vec![Relation {
                name: "AP".into(),
                src: "author".into(),
                dst: "paper".into(),
                matrix: ap,
            }],
            "author",
            DenseMatrix::zeros(2, 1),
            vec![Some(0), Some(1)],
            2,
        )
        .unwrap()
        .with_reverse_relations()
    }

    #[test]
    fn induce_apa() {
        let g = toy();
        let mp = MetaPath::new("APA", vec!["AP".into(), "AP_rev".into()]);
        assert_eq!(
            induce_metapath_adjacency(&g, &mp).unwrap(),
            csr(&[&[2.0, 0.0], &[0.0, 1.0]])
        );
        assert_eq!(MetaPath::parse("APA", &g).unwrap(), mp);
        assert_eq!(MetaPath::parse("x=AP,AP_rev", &g).unwrap().relation_seq, mp.relation_seq);
    }

    #[test]
    fn induce_errors() {
        let g = toy();
        let unknown = MetaPath::new("bad", vec!["XY".into()]);
        assert!(matches!(
            induce_metapath_adjacency(&g, &unknown),
            Err(Error::Lookup { .. })
        ));
        let broken = MetaPath::new("bad", vec!["AP".into(), "AP".into()]);
        assert!(matches!(
            induce_metapath_adjacency(&g, &broken),
            Err(Error::Schema(_))
        ));
        let open = MetaPath::new("AP", vec!["AP".into()]);
        assert!(matches!(open.validate(&g), Err(Error::Schema(_))));
    }

    #[test]
    fn single_relation_path_is_unchanged() {
        let aa = csr(&[&[0.0, 3.0], &[1.0, 0.0]]);
        let g = HeteroGraph::new(
            vec![NodeType {
                name: "a".into(),
                count: 2,
            }],
            vec![Relation {
                name: "AA".into(),
                src: "a".into(),
                dst: "a".into(),
                matrix: aa.clone(),
            }],
            "a",
            DenseMatrix::zeros(2, 1),
            vec![None, None],
            1,
        )
        .unwrap();
        let mp = MetaPath::new("AA", vec!["AA".into()]);
        assert_eq!(induce_metapath_adjacency(&g, &mp).unwrap(), aa);
    }

    fn sub_from_raw(raw: CsrMatrix, opts: SubgraphOptions) -> CsrMatrix {
        sym_normalize(&process(&raw, opts)).unwrap()
    }

    #[test]
    fn build_subgraph_conventions() {
        let diag = csr(&[&[2.0, 0.0], &[0.0, 1.0]]);
        let n = sub_from_raw(
            diag,
            SubgraphOptions {
                binarize: true,
                drop_selfloops: true,
            },
        );
        assert_eq!(n.nnz(), 0);

        let off = csr(&[&[0.0, 2.0], &[2.0, 0.0]]);
        let expect = csr(&[&[0.0, 1.0], &[1.0, 0.0]]);
        for binarize in [true, false] {
            let n = sub_from_raw(
                off.clone(),
                SubgraphOptions {
                    binarize,
                    drop_selfloops: true,
                },
            );
            assert_eq!(n, expect);
        }

        let g = toy();
        let mp = MetaPath::parse("APA", &g).unwrap();
        let s = build_subgraph(&g, &mp, SubgraphOptions::default()).unwrap();
        assert_eq!(s.raw_adj.nnz(), 2);
        assert_eq!(s.norm_adj.nnz(), 0);
    }

    #[test]
    fn homophily_examples() {
        let pair = csr(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(edge_homophily(&pair, &[3, 3]).unwrap(), 1.0);

        let path = csr(&[
            &[0.0, 1.0, 0.0, 0.0],
            &[1.0, 0.0, 1.0, 0.0],
            &[0.0, 1.0, 0.0, 1.0],
            &[0.0, 0.0, 1.0, 0.0],
        ]);
        let h = edge_homophily(&path, &[0, 0, 1, 1]).unwrap();
        assert!((h - 4.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn homophily_ignores_selfloops_and_rejects_empty() {
        let loops = csr(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert!(matches!(
            edge_homophily(&loops, &[0, 1]),
            Err(Error::UndefinedHomophily)
        ));
        let mixed = csr(&[&[5.0, 1.0], &[1.0, 5.0]]);
        assert_eq!(edge_homophily(&mixed, &[0, 1]).unwrap(), 0.0);
        assert!(edge_homophily(&mixed, &[0]).is_err());
    }

    #[test]
    fn weighted_homophily_uses_counts() {
        let m = csr(&[&[0.0, 3.0, 1.0], &[3.0, 0.0, 0.0], &[1.0, 0.0, 0.0]]);
        let labels = [0, 0, 1];
        assert!((edge_homophily(&m, &labels).unwrap() - 0.5).abs() < 1e-15);
        assert!((weighted_edge_homophily(&m, &labels).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn labeled_homophily_skips_unlabeled_endpoints() {
        let m = csr(&[&[0.0, 1.0, 1.0], &[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]]);
        let h = labeled_edge_homophily(&m, &[Some(0), Some(0), None], false).unwrap();
        assert_eq!(h, 1.0);
    }

    #[test]
    fn graph_validation() {
        let bad = HeteroGraph::new(
            vec![NodeType {
                name: "a".into(),
                count: 2,
            }],
            vec![],
            "a",
            DenseMatrix::zeros(2, 1),
            vec![Some(0), Some(5)],
            2,
        );
        assert!(matches!(bad, Err(Error::Schema(_))));
        let bad = HeteroGraph::new(
            vec![NodeType {
                name: "a".into(),
                count: 2,
            }],
            vec![],
            "a",
            DenseMatrix::zeros(3, 1),
            vec![None; 2],
            2,
        );
        assert!(bad.is_err());
    }
}

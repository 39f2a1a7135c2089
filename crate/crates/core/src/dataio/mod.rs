//! On-disk datasets and experiment configuration.
//!
//! A dataset is a directory:
//!
//! ```text
//! schema.json      node types, relations, target type, classes
//! <edge files>     one TSV per relation: src<TAB>dst[<TAB>weight]
//! features.bin     target-type features (see `features`), or a .tsv file
//! labels.tsv       node_id<TAB>class, unlisted target nodes are unlabeled
//! splits.json      {"train": [...], "val": [...], "test": [...]}
//! ```
//!
//! Node ids are zero-based and local to their type. Lines that are blank or
//! start with `#` are skipped in TSV files.

pub mod config;
pub mod features;

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hetgraph::{build_subgraph, HeteroGraph, MetaPath, NodeType, Relation, SubgraphOptions, REVERSE_SUFFIX};
use crate::model::ModelInput;
use crate::sparse::CsrMatrix;
use crate::train::Splits;

pub use config::{load_config, ExperimentConfig};

pub const SCHEMA_FILE: &str = "schema.json";
/// Environment variable naming the directory relative dataset paths resolve against.
pub const DATA_DIR_ENV: &str = "H2SGNN_DATA_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationSchema {
    pub name: String,
    pub src: String,
    pub dst: String,
    pub file: String,
}

/// Counts a dataset is expected to have; checked on load when present.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedStats {
    #[serde(default)]
    pub nodes: Option<usize>,
    #[serde(default)]
    pub node_types: Option<usize>,
    #[serde(default)]
    pub edges: Option<usize>,
}

fn default_features() -> String {
    "features.bin".into()
}

fn default_labels() -> String {
    "labels.tsv".into()
}

fn default_splits() -> String {
    "splits.json".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSchema {
    pub name: String,
    pub target_type: String,
    pub num_classes: usize,
    #[serde(default)]
    pub class_names: Vec<String>,
    pub node_types: Vec<NodeType>,
    pub relations: Vec<RelationSchema>,
    #[serde(default = "default_features")]
    pub features: String,
    #[serde(default = "default_labels")]
    pub labels: String,
    #[serde(default = "default_splits")]
    pub splits: String,
    #[serde(default)]
    pub expected: Option<ExpectedStats>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub target_type: String,
    pub class_names: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    /// Nodes summed over all types.
    pub nodes: usize,
    pub node_types: usize,
    /// Edge records over the declared relations; reverse relations excluded.
    pub edges: usize,
    pub edges_per_relation: Vec<(String, usize)>,
}

#[derive(Clone, Debug)]
pub struct DatasetBundle {
    pub graph: HeteroGraph,
    pub splits: Splits,
    pub meta: DatasetMeta,
    pub stats: DatasetStats,
}

impl DatasetBundle {
    /// Builds a bundle from an in-memory graph, materializing reverse
    /// relations and validating the splits.
    pub fn new(graph: HeteroGraph, splits: Splits, meta: DatasetMeta) -> Result<Self> {
        let graph = graph.with_reverse_relations();
        check_splits(&graph, &splits)?;
        let edges_per_relation: Vec<(String, usize)> = forward_relations(&graph)
            .map(|r| (r.name.clone(), r.matrix.nnz()))
            .collect();
        let stats = DatasetStats {
            nodes: graph.total_nodes(),
            node_types: graph.node_types().len(),
            edges: edges_per_relation.iter().map(|(_, c)| c).sum(),
            edges_per_relation,
        };
        Ok(Self {
            graph,
            splits,
            meta,
            stats,
        })
    }
}

/// Declared relations, i.e. everything except materialized `_rev` transposes.
fn forward_relations(graph: &HeteroGraph) -> impl Iterator<Item = &Relation> {
    graph.relations().iter().filter(move |r| {
        r.name
            .strip_suffix(REVERSE_SUFFIX)
            .is_none_or(|base| graph.relation(base).is_err())
    })
}

fn check_splits(graph: &HeteroGraph, splits: &Splits) -> Result<()> {
    let n = graph.num_targets();
    let mut seen = HashSet::new();
    for (name, ids) in [
        ("train", &splits.train),
        ("val", &splits.val),
        ("test", &splits.test),
    ] {
        for &i in ids {
            if i >= n {
                return Err(Error::Schema(format!(
                    "{name} split node {i} outside [0, {n})"
                )));
            }
            if !seen.insert(i) {
                return Err(Error::Schema(format!(
                    "node {i} appears in more than one split (again in {name})"
                )));
            }
            if graph.labels()[i].is_none() {
                return Err(Error::Schema(format!("{name} split node {i} is unlabeled")));
            }
        }
    }
    Ok(())
}

/// `dir` itself if absolute or existing, otherwise joined onto
/// `$H2SGNN_DATA_DIR` when that is set.
pub fn resolve_dataset_dir(dir: &Path) -> PathBuf {
    if dir.is_absolute() || dir.exists() {
        return dir.to_path_buf();
    }
    match std::env::var_os(DATA_DIR_ENV) {
        Some(root) => Path::new(&root).join(dir),
        None => dir.to_path_buf(),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

fn invalid(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Validation {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_id(field: &str, bound: usize, what: &str, path: &Path, line: usize) -> Result<usize> {
    let id: usize = field
        .trim()
        .parse()
        .map_err(|_| invalid(path, line, format!("{what} `{field}` is not a node id")))?;
    if id >= bound {
        return Err(invalid(
            path,
            line,
            format!("{what} {id} outside [0, {bound})"),
        ));
    }
    Ok(id)
}

/// Parses an edge file. Returns the matrix and the number of records.
pub fn parse_edges(text: &str, n_src: usize, n_dst: usize, path: &Path) -> Result<(CsrMatrix, usize)> {
    let mut trips = Vec::new();
    for (ln, line) in data_lines(text) {
        let fields: Vec<&str> = line.split('\t').collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(invalid(
                path,
                ln,
                format!("expected src<TAB>dst[<TAB>weight], got {} fields", fields.len()),
            ));
        }
        let s = parse_id(fields[0], n_src, "source", path, ln)?;
        let d = parse_id(fields[1], n_dst, "target", path, ln)?;
        let w = match fields.get(2) {
            None => 1.0,
            Some(f) => {
                let w: f64 = f
                    .trim()
                    .parse()
                    .map_err(|_| invalid(path, ln, format!("weight `{f}` is not a number")))?;
                if !w.is_finite() || w < 0.0 {
                    return Err(invalid(path, ln, format!("weight {w} must be finite and non-negative")));
                }
                w
            }
        };
        trips.push((s, d, w));
    }
    let records = trips.len();
    Ok((CsrMatrix::from_triplets(n_src, n_dst, trips)?, records))
}

pub fn parse_labels(text: &str, n: usize, num_classes: usize, path: &Path) -> Result<Vec<Option<usize>>> {
    let mut labels = vec![None; n];
    for (ln, line) in data_lines(text) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(invalid(path, ln, "expected node_id<TAB>class"));
        }
        let node = parse_id(fields[0], n, "node", path, ln)?;
        let class = parse_id(fields[1], num_classes, "class", path, ln)?;
        if labels[node].replace(class).is_some() {
            return Err(invalid(path, ln, format!("node {node} labeled twice")));
        }
    }
    Ok(labels)
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, path: &Path) -> Result<T> {
    serde_json::from_str(text).map_err(|e| invalid(path, e.line(), e.to_string()))
}

/// Loads a dataset directory.
pub fn load_dataset(dir: &Path) -> Result<DatasetBundle> {
    let schema_path = dir.join(SCHEMA_FILE);
    let schema: DatasetSchema = parse_json(&read_text(&schema_path)?, &schema_path)?;

    let count = |ty: &str| -> Result<usize> {
        schema
            .node_types
            .iter()
            .find(|t| t.name == ty)
            .map(|t| t.count)
            .ok_or_else(|| Error::Schema(format!("{}: unknown node type `{ty}`", schema_path.display())))
    };

    let mut relations = Vec::with_capacity(schema.relations.len());
    let mut edges_per_relation = Vec::new();
    for rs in &schema.relations {
        if rs.name.ends_with(REVERSE_SUFFIX) {
            return Err(Error::Schema(format!(
                "relation `{}`: the `{REVERSE_SUFFIX}` suffix is reserved for generated transposes",
                rs.name
            )));
        }
        let path = dir.join(&rs.file);
        let (matrix, records) = parse_edges(&read_text(&path)?, count(&rs.src)?, count(&rs.dst)?, &path)?;
        edges_per_relation.push((rs.name.clone(), records));
        relations.push(Relation {
            name: rs.name.clone(),
            src: rs.src.clone(),
            dst: rs.dst.clone(),
            matrix,
        });
    }

    let n = count(&schema.target_type)?;
    let feat_path = dir.join(&schema.features);
    let features = features::read_features(&feat_path)?;
    let labels_path = dir.join(&schema.labels);
    let labels = parse_labels(&read_text(&labels_path)?, n, schema.num_classes, &labels_path)?;
    let splits_path = dir.join(&schema.splits);
    let splits: Splits = parse_json(&read_text(&splits_path)?, &splits_path)?;

    let graph = HeteroGraph::new(
        schema.node_types.clone(),
        relations,
        schema.target_type.clone(),
        features,
        labels,
        schema.num_classes,
    )?
    .with_reverse_relations();
    check_splits(&graph, &splits)?;

    let stats = DatasetStats {
        nodes: graph.total_nodes(),
        node_types: graph.node_types().len(),
        edges: edges_per_relation.iter().map(|(_, c)| c).sum(),
        edges_per_relation,
    };
    if let Some(exp) = &schema.expected {
        for (what, want, got) in [
            ("nodes", exp.nodes, stats.nodes),
            ("node types", exp.node_types, stats.node_types),
            ("edges", exp.edges, stats.edges),
        ] {
            if let Some(want) = want.filter(|&w| w != got) {
                return Err(Error::Schema(format!(
                    "{}: expected {want} {what}, found {got}",
                    schema_path.display()
                )));
            }
        }
    }
    info!(
        "loaded `{}`: {} nodes, {} node types, {} edges",
        schema.name, stats.nodes, stats.node_types, stats.edges
    );
    Ok(DatasetBundle {
        graph,
        splits,
        meta: DatasetMeta {
            name: schema.name,
            target_type: schema.target_type,
            class_names: schema.class_names,
        },
        stats,
    })
}

/// Meta-path subgraphs plus (optionally row-normalized) target features.
pub fn build_input(
    graph: &HeteroGraph,
    metapaths: &[MetaPath],
    opts: SubgraphOptions,
    row_normalize: bool,
) -> Result<ModelInput> {
    let subgraphs = metapaths
        .iter()
        .map(|mp| build_subgraph(graph, mp, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut x = graph.features().clone();
    if row_normalize {
        x.row_normalize_l1();
    }
    ModelInput::new(subgraphs, x)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn edges_tsv(m: &CsrMatrix) -> String {
    let weighted = m.values().iter().any(|&v| v != 1.0);
    let mut s = String::new();
    for (i, j, v) in m.iter() {
        if weighted {
            s.push_str(&format!("{i}\t{j}\t{v}\n"));
        } else {
            s.push_str(&format!("{i}\t{j}\n"));
        }
    }
    s
}

/// Writes a bundle in the layout [`load_dataset`] reads. Reverse relations
/// are not written; the loader regenerates them.
pub fn write_dataset(bundle: &DatasetBundle, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let g = &bundle.graph;
    let mut relations = Vec::new();
    for r in forward_relations(g) {
        let file = format!("edges/{}.tsv", r.name);
        write_text(&dir.join(&file), &edges_tsv(&r.matrix))?;
        relations.push(RelationSchema {
            name: r.name.clone(),
            src: r.src.clone(),
            dst: r.dst.clone(),
            file,
        });
    }
    let schema = DatasetSchema {
        name: bundle.meta.name.clone(),
        target_type: g.target_type().to_string(),
        num_classes: g.num_classes(),
        class_names: bundle.meta.class_names.clone(),
        node_types: g.node_types().to_vec(),
        relations,
        features: default_features(),
        labels: default_labels(),
        splits: default_splits(),
        expected: None,
    };
    let json = serde_json::to_string_pretty(&schema).map_err(|e| Error::Format(e.to_string()))?;
    write_text(&dir.join(SCHEMA_FILE), &json)?;
    features::write_features(&dir.join(&schema.features), g.features())?;

    let mut labels = String::new();
    for (i, l) in g.labels().iter().enumerate() {
        if let Some(c) = l {
            labels.push_str(&format!("{i}\t{c}\n"));
        }
    }
    write_text(&dir.join(&schema.labels), &labels)?;
    let splits = serde_json::to_string(&bundle.splits).map_err(|e| Error::Format(e.to_string()))?;
    write_text(&dir.join(&schema.splits), &splits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::DenseMatrix;

    fn toy_bundle() -> DatasetBundle {
        let ap = CsrMatrix::from_triplets(2, 3, vec![(0, 0, 1.0), (0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let graph = HeteroGraph::new(
            vec![
                NodeType { name: "author".into(), count: 2 },
                NodeType { name: "paper".into(), count: 3 },
            ],
            vec![Relation {
                name: "AP".into(),
                src: "author".into(),
                dst: "paper".into(),
                matrix: ap,
            }],
            "author",
            DenseMatrix::from_rows(&[[0.5, 1.0], [-1.0, 0.25]]),
            vec![Some(0), Some(1)],
            2,
        )
        .unwrap();
        let splits = Splits { train: vec![0], val: vec![], test: vec![1] };
        let meta = DatasetMeta {
            name: "toy".into(),
            target_type: "author".into(),
            class_names: vec!["a".into(), "b".into()],
        };
        DatasetBundle::new(graph, splits, meta).unwrap()
    }

    #[test]
    fn minimal_round_trip() {
        let b = toy_bundle();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&b, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back.stats.nodes, 5);
        assert_eq!(back.stats.node_types, 2);
        assert_eq!(back.stats.edges, 3);
        assert_eq!(back.graph.features(), b.graph.features());
        assert_eq!(back.graph.labels(), b.graph.labels());
        assert_eq!(back.splits, b.splits);
        assert_eq!(back.meta, b.meta);
        let ap = back.graph.relation("AP").unwrap();
        assert_eq!(ap.matrix, b.graph.relation("AP").unwrap().matrix);
        assert_eq!(back.graph.relation("AP_rev").unwrap().matrix, ap.matrix.transpose());
    }

    #[test]
    fn bad_edge_row_is_reported_with_line() {
        let b = toy_bundle();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&b, dir.path()).unwrap();
        fs::write(dir.path().join("edges/AP.tsv"), "0\t0\n# comment\n1\t3\n").unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        match err {
            Error::Validation { path, line, msg } => {
                assert!(path.ends_with("edges/AP.tsv"));
                assert_eq!(line, 3);
                assert!(msg.contains('3'), "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_file_and_expected_counts() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::Io { .. })));

        write_dataset(&toy_bundle(), dir.path()).unwrap();
        let path = dir.path().join(SCHEMA_FILE);
        let mut schema: DatasetSchema = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        schema.expected = Some(ExpectedStats { nodes: Some(5), node_types: Some(2), edges: Some(3) });
        fs::write(&path, serde_json::to_string(&schema).unwrap()).unwrap();
        assert!(load_dataset(dir.path()).is_ok());
        schema.expected = Some(ExpectedStats { edges: Some(4), ..Default::default() });
        fs::write(&path, serde_json::to_string(&schema).unwrap()).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::Schema(_))));
    }

    #[test]
    fn split_validation() {
        let b = toy_bundle();
        let bad = Splits { train: vec![0], val: vec![0], test: vec![] };
        assert!(DatasetBundle::new(b.graph.clone(), bad, b.meta.clone()).is_err());
        let bad = Splits { train: vec![7], val: vec![], test: vec![] };
        assert!(DatasetBundle::new(b.graph.clone(), bad, b.meta.clone()).is_err());
    }

    #[test]
    fn labels_parse_errors() {
        let p = Path::new("labels.tsv");
        assert_eq!(parse_labels("0\t1\n", 2, 2, p).unwrap(), vec![Some(1), None]);
        assert!(matches!(parse_labels("0\t2\n", 2, 2, p), Err(Error::Validation { line: 1, .. })));
        assert!(matches!(parse_labels("0\t1\n0\t0\n", 2, 2, p), Err(Error::Validation { line: 2, .. })));
    }

    #[test]
    fn weighted_edges_round_trip() {
        let p = Path::new("e.tsv");
        let (m, records) = parse_edges("0\t1\t2.5\n0\t1\t0.5\n1\t0\n", 2, 2, p).unwrap();
        assert_eq!(records, 3);
        assert_eq!(m.get(0, 1), 3.0);
        let (again, _) = parse_edges(&edges_tsv(&m), 2, 2, p).unwrap();
        assert_eq!(again, m);
        assert!(parse_edges("0\t1\t-1\n", 2, 2, p).is_err());
    }
}

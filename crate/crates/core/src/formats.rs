//! Dataset readers and writers: the multi-file TU layout and JSON lines.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Dataset, Graph, Label};

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if !trimmed.is_empty() {
            out.push((i + 1, trimmed.to_owned()));
        }
    }
    Ok(out)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn parse_int(path: &Path, line: usize, token: &str) -> Result<i64> {
    token
        .trim()
        .parse::<i64>()
        .map_err(|_| Error::parse(file_name(path), line, format!("expected an integer, found {token:?}")))
}

/// Finds the `DS` prefix shared by the four TU files in `dir`.
fn tu_prefix(dir: &Path) -> Result<String> {
    if let Some(name) = dir.file_name().map(|s| s.to_string_lossy().into_owned()) {
        if dir.join(format!("{name}_A.txt")).exists() {
            return Ok(name);
        }
    }
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut prefixes: Vec<String> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            e.file_name()
                .to_string_lossy()
                .strip_suffix("_graph_indicator.txt")
                .map(str::to_owned)
        })
        .collect();
    prefixes.sort();
    prefixes.into_iter().next().ok_or_else(|| {
        Error::io(
            dir.join("DS_graph_indicator.txt"),
            std::io::Error::new(std::io::ErrorKind::NotFound, "no TU dataset files found"),
        )
    })
}

/// Reads a dataset stored as `DS_A.txt`, `DS_graph_indicator.txt`,
/// `DS_node_labels.txt` and `DS_graph_labels.txt` inside `dir`.
///
/// Node ids in the edge file are 1-based and global. Graph class labels are
/// mapped to `{-1, +1}`: the numerically smaller raw label becomes `-1`.
pub fn parse_tu_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let prefix = tu_prefix(dir)?;
    let path = |suffix: &str| -> PathBuf { dir.join(format!("{prefix}_{suffix}.txt")) };
    let (a_path, ind_path, nl_path, gl_path) = (
        path("A"),
        path("graph_indicator"),
        path("node_labels"),
        path("graph_labels"),
    );

    let graph_lines = read_lines(&gl_path)?;
    let raw_classes = graph_lines
        .iter()
        .map(|(line, text)| parse_int(&gl_path, *line, text))
        .collect::<Result<Vec<_>>>()?;
    let n_graphs = raw_classes.len();

    let indicator = read_lines(&ind_path)?;
    let node_labels = read_lines(&nl_path)?;
    if indicator.len() != node_labels.len() {
        return Err(Error::parse(
            file_name(&nl_path),
            node_labels.len(),
            format!(
                "{} node labels but {} graph indicator lines",
                node_labels.len(),
                indicator.len()
            ),
        ));
    }

    // global node -> (graph, local index)
    let mut placement = Vec::with_capacity(indicator.len());
    let mut graph_labels: Vec<Vec<Label>> = vec![Vec::new(); n_graphs];
    for ((line, text), (label_line, label_text)) in indicator.iter().zip(&node_labels) {
        let gid = parse_int(&ind_path, *line, text)?;
        if gid < 1 || gid as usize > n_graphs {
            return Err(Error::parse(
                file_name(&ind_path),
                *line,
                format!("graph id {gid} outside 1..={n_graphs}"),
            ));
        }
        let g = gid as usize - 1;
        let label = parse_int(&nl_path, *label_line, label_text)?;
        placement.push((g, graph_labels[g].len()));
        graph_labels[g].push(Label::new(label.to_string())?);
    }

    let mut graph_edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_graphs];
    for (line, text) in read_lines(&a_path)? {
        let mut parts = text.split(',');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::parse(
                file_name(&a_path),
                line,
                format!("expected \"i, j\", found {text:?}"),
            ));
        };
        let ends = [parse_int(&a_path, line, a)?, parse_int(&a_path, line, b)?];
        let mut local = [(0, 0); 2];
        for (slot, id) in local.iter_mut().zip(ends) {
            if id < 1 || id as usize > placement.len() {
                return Err(Error::parse(
                    file_name(&a_path),
                    line,
                    format!("node id {id} outside 1..={}", placement.len()),
                ));
            }
            *slot = placement[id as usize - 1];
        }
        if ends[0] == ends[1] {
            return Err(Error::parse(
                file_name(&a_path),
                line,
                format!("self-loop on node {}", ends[0]),
            ));
        }
        if local[0].0 != local[1].0 {
            return Err(Error::parse(
                file_name(&a_path),
                line,
                format!("edge {} - {} crosses two graphs", ends[0], ends[1]),
            ));
        }
        graph_edges[local[0].0].push((local[0].1, local[1].1));
    }

    let distinct: BTreeSet<i64> = raw_classes.iter().copied().collect();
    let classes: Vec<i64> = distinct.into_iter().collect();
    let labels = match classes.as_slice() {
        [] => Vec::new(),
        [only] => vec![if *only > 0 { 1 } else { -1 }; n_graphs],
        [neg, _pos] => raw_classes
            .iter()
            .map(|c| if c == neg { -1 } else { 1 })
            .collect(),
        _ => {
            return Err(Error::parse(
                file_name(&gl_path),
                1,
                format!("expected two classes, found {}", classes.len()),
            ))
        }
    };

    let graphs = graph_labels
        .into_iter()
        .zip(graph_edges)
        .map(|(labels, edges)| Graph::new(labels, edges))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(prefix, graphs, labels)
}

#[derive(Serialize, Deserialize)]
struct JsonRecord {
    labels: Vec<Label>,
    edges: Vec<[usize; 2]>,
    class: i8,
}

/// Reads one graph per line: `{"labels": [...], "edges": [[i, j], ...], "class": -1|1}`.
pub fn parse_jsonl_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut graphs = Vec::new();
    let mut labels = Vec::new();
    for (line, text) in read_lines(path)? {
        let record: JsonRecord = serde_json::from_str(&text)
            .map_err(|e| Error::parse(file_name(path), line, e.to_string()))?;
        if record.class != 1 && record.class != -1 {
            return Err(Error::parse(
                file_name(path),
                line,
                format!("class {} is not -1 or 1", record.class),
            ));
        }
        let graph = Graph::new(record.labels, record.edges.iter().map(|e| (e[0], e[1])))
            .map_err(|e| Error::parse(file_name(path), line, e.to_string()))?;
        graphs.push(graph);
        labels.push(record.class);
    }
    Dataset::new(name, graphs, labels)
}

pub fn write_jsonl_dataset<W: Write>(dataset: &Dataset, mut out: W) -> Result<()> {
    for (graph, &class) in dataset.graphs().iter().zip(dataset.labels()) {
        let record = JsonRecord {
            labels: graph.labels().to_vec(),
            edges: graph.edges().iter().map(|&(a, b)| [a, b]).collect(),
            class,
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tu(dir: &Path, name: &str, a: &str, ind: &str, nl: &str, gl: &str) {
        for (suffix, body) in [("A", a), ("graph_indicator", ind), ("node_labels", nl), ("graph_labels", gl)] {
            fs::write(dir.join(format!("{name}_{suffix}.txt")), body).unwrap();
        }
    }

    #[test]
    fn tu_two_nodes_duplicate_edge() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("DS");
        fs::create_dir(&dir).unwrap();
        write_tu(&dir, "DS", "1, 2\n2, 1\n", "1\n1\n", "6\n7\n", "1\n");
        let ds = parse_tu_dataset(&dir).unwrap();
        assert_eq!(ds.len(), 1);
        let g = &ds.graphs()[0];
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edges(), &[(0, 1)]);
        assert_eq!(g.label(0).as_str(), "6");
        assert_eq!(ds.labels(), &[1]);
    }

    #[test]
    fn tu_empty_edges_and_crlf() {
        let tmp = tempfile::tempdir().unwrap();
        write_tu(tmp.path(), "X", "", "1\r\n", "3\r\n", "0\r\n");
        let ds = parse_tu_dataset(tmp.path()).unwrap();
        assert_eq!(ds.graphs()[0].node_count(), 1);
        assert_eq!(ds.graphs()[0].edge_count(), 0);
    }

    #[test]
    fn tu_errors_carry_line_numbers() {
        let tmp = tempfile::tempdir().unwrap();
        write_tu(tmp.path(), "X", "1,2\n2,2\n", "1\n1\n", "1\n1\n", "1\n");
        let err = parse_tu_dataset(tmp.path()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");

        write_tu(tmp.path(), "X", "1,2\n", "1\n2\n", "1\n1\n", "1\n-1\n");
        let err = parse_tu_dataset(tmp.path()).unwrap_err();
        assert!(err.to_string().contains("crosses"), "{err}");

        write_tu(tmp.path(), "X", "1,9\n", "1\n1\n", "1\n1\n", "1\n");
        assert!(matches!(parse_tu_dataset(tmp.path()), Err(Error::Parse { line: 1, .. })));

        fs::remove_file(tmp.path().join("X_node_labels.txt")).unwrap();
        assert!(matches!(parse_tu_dataset(tmp.path()), Err(Error::Io { .. })));
    }

    #[test]
    fn tu_class_mapping_by_value() {
        let tmp = tempfile::tempdir().unwrap();
        write_tu(tmp.path(), "X", "", "1\n2\n3\n", "1\n1\n1\n", "2\n0\n2\n");
        let ds = parse_tu_dataset(tmp.path()).unwrap();
        assert_eq!(ds.labels(), &[1, -1, 1]);
    }

    #[test]
    fn jsonl_examples() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("d.jsonl");
        fs::write(
            &path,
            "{\"labels\":[\"A\"],\"edges\":[],\"class\":1}\n{\"labels\":[\"A\",\"B\"],\"edges\":[[0,1]],\"class\":-1}\n",
        )
        .unwrap();
        let ds = parse_jsonl_dataset(&path).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.graphs()[0].node_count(), 1);
        assert_eq!(ds.graphs()[1].edges(), &[(0, 1)]);
        assert_eq!(ds.labels(), &[1, -1]);

        fs::write(&path, "{\"labels\":[\"A\"],\"edges\":[],\"class\":1}\n{\"labels\":[\"A\"],\"edges\":[[0,0]],\"class\":1}\n").unwrap();
        assert!(matches!(parse_jsonl_dataset(&path), Err(Error::Parse { line: 2, .. })));
        fs::write(&path, "{\"labels\":[\"A\"],\"edges\":[[0,3]],\"class\":1}\n").unwrap();
        assert!(matches!(parse_jsonl_dataset(&path), Err(Error::Parse { line: 1, .. })));
        fs::write(&path, "not json\n").unwrap();
        assert!(matches!(parse_jsonl_dataset(&path), Err(Error::Parse { line: 1, .. })));
        fs::write(&path, "{\"labels\":[\"a#b\"],\"edges\":[],\"class\":1}\n").unwrap();
        assert!(parse_jsonl_dataset(&path).is_err());
    }
}

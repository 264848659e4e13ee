//! Text formats: the `HTL1` dataset and ground-truth files, histogram CSV,
//! and classification CSV.
//!
//! Dataset layout (UTF-8): a header line
//! `HTL1 d=<d> h=<h> q=<q> k=<k> model=<IIDM|VRM|FIM>` followed by one line
//! per leaf: `<level>:<index> <comma-separated letters> <label-id or ->`.
//! Ground-truth files use the same row shape for every node of the tree and
//! append the realized edge parameters, one edge per line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::data::{DataError, DataHeader, Dataset};
use crate::label::LabelId;
use crate::model::{ModelVariant, PairPerm, Perm, Representation};
use crate::sample::{GroundTruth, RealizedEdges};
use crate::tree::{NodeRef, TreeTopology};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn parse_err(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Parse { line, msg: msg.into() }
}

pub fn format_header(h: &DataHeader) -> String {
    format!("HTL1 d={} h={} q={} k={} model={}", h.d, h.h, h.q, h.k, h.model.as_str())
}

pub fn parse_header(line: &str) -> Result<DataHeader, FormatError> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some("HTL1") {
        return Err(parse_err(1, "missing HTL1 magic"));
    }
    let mut d = None;
    let mut h = None;
    let mut q = None;
    let mut k = None;
    let mut model = None;
    for part in parts {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| parse_err(1, format!("malformed header field {part:?}")))?;
        match key {
            "d" => d = value.parse::<u64>().ok(),
            "h" => h = value.parse::<u32>().ok(),
            "q" => q = value.parse::<u16>().ok(),
            "k" => k = value.parse::<usize>().ok(),
            "model" => model = ModelVariant::parse(value),
            _ => return Err(parse_err(1, format!("unknown header field {key:?}"))),
        }
    }
    Ok(DataHeader {
        d: d.ok_or_else(|| parse_err(1, "missing d"))?,
        h: h.ok_or_else(|| parse_err(1, "missing h"))?,
        q: q.ok_or_else(|| parse_err(1, "missing q"))?,
        k: k.ok_or_else(|| parse_err(1, "missing k"))?,
        model: model.ok_or_else(|| parse_err(1, "missing model"))?,
    })
}

fn write_row(out: &mut String, node: NodeRef, rep: &Representation, label: Option<LabelId>) {
    let _ = write!(out, "{}:{} ", node.level, node.index);
    for (i, l) in rep.letters().iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{l}");
    }
    match label {
        Some(l) => {
            let _ = write!(out, " {l}");
        }
        None => out.push_str(" -"),
    }
    out.push('\n');
}

fn parse_node(line_no: usize, token: &str) -> Result<NodeRef, FormatError> {
    let (lvl, idx) = token
        .split_once(':')
        .ok_or_else(|| parse_err(line_no, format!("bad node address {token:?}")))?;
    let level = lvl
        .parse::<u32>()
        .map_err(|_| parse_err(line_no, format!("bad level in {token:?}")))?;
    let index = idx
        .parse::<u64>()
        .map_err(|_| parse_err(line_no, format!("bad index in {token:?}")))?;
    Ok(NodeRef::new(level, index))
}

fn parse_row(
    line_no: usize,
    line: &str,
    header: &DataHeader,
) -> Result<(NodeRef, Representation, Option<LabelId>), FormatError> {
    let mut parts = line.split_whitespace();
    let node = parse_node(line_no, parts.next().ok_or_else(|| parse_err(line_no, "empty row"))?)?;
    let letters_tok = parts.next().ok_or_else(|| parse_err(line_no, "missing letters"))?;
    let mut letters = Vec::with_capacity(header.k);
    for tok in letters_tok.split(',') {
        let v = tok
            .parse::<u16>()
            .map_err(|_| parse_err(line_no, format!("bad letter {tok:?}")))?;
        if v >= header.q {
            return Err(parse_err(line_no, format!("letter {v} out of range for q={}", header.q)));
        }
        letters.push(v as u8);
    }
    if letters.len() != header.k {
        return Err(parse_err(
            line_no,
            format!("row has {} letters, header says k={}", letters.len(), header.k),
        ));
    }
    let label_tok = parts.next().ok_or_else(|| parse_err(line_no, "missing label column"))?;
    let label = if label_tok == "-" {
        None
    } else {
        Some(
            label_tok
                .parse::<LabelId>()
                .map_err(|_| parse_err(line_no, format!("bad label {label_tok:?}")))?,
        )
    };
    if parts.next().is_some() {
        return Err(parse_err(line_no, "trailing tokens"));
    }
    Ok((node, Representation::new(letters), label))
}

pub fn dataset_to_string(data: &Dataset) -> String {
    let mut out = String::new();
    out.push_str(&format_header(&data.header));
    out.push('\n');
    for (node, rep, label) in data.rows_in_order() {
        write_row(&mut out, node, rep, label);
    }
    out
}

pub fn dataset_from_str(text: &str) -> Result<Dataset, FormatError> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let header = parse_header(first)?;
    let mut labeled = Vec::new();
    let mut unlabeled = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let (node, rep, label) = parse_row(idx + 1, line, &header)?;
        match label {
            Some(l) => labeled.push((node, rep, l)),
            None => unlabeled.push((node, rep)),
        }
    }
    let data = Dataset { header, labeled, unlabeled };
    data.validate()?;
    Ok(data)
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<(), FormatError> {
    fs::write(path, dataset_to_string(data))?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset, FormatError> {
    dataset_from_str(&fs::read_to_string(path)?)
}

fn perm_csv(values: impl Iterator<Item = u32>) -> String {
    let mut s = String::new();
    for (i, v) in values.enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{v}");
    }
    s
}

/// Serialize the full generator state: every node row, then per-level
/// rewirings (FIM), then one `edge` line per tree edge.
pub fn ground_truth_to_string(gt: &GroundTruth) -> String {
    let tree = &gt.tree;
    let header = DataHeader {
        d: tree.arity(),
        h: tree.height(),
        q: gt.params.q,
        k: gt.params.k,
        model: gt.params.variant,
    };
    let mut out = String::new();
    out.push_str(&format_header(&header));
    out.push('\n');
    for level in 0..=tree.height() {
        for index in 0..tree.level_size(level) {
            let node = NodeRef::new(level, index);
            write_row(&mut out, node, gt.rep(node), gt.labels.most_specific(node));
        }
    }
    if let Some(rewiring) = &gt.params.rewiring {
        for (i, sigma) in rewiring.iter().enumerate() {
            let _ = writeln!(out, "rewire {} {}", i + 1, perm_csv(sigma.0.iter().copied()));
        }
    }
    match &gt.edges {
        RealizedEdges::Iidm => {}
        RealizedEdges::Vrm(levels) => {
            for (li, perms) in levels.iter().enumerate() {
                for (index, p) in perms.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "edge {}:{} sigma={}",
                        li + 1,
                        index,
                        perm_csv(p.0.iter().copied())
                    );
                }
            }
        }
        RealizedEdges::Fim(levels) => {
            for (li, perms) in levels.iter().enumerate() {
                for (index, p) in perms.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "edge {}:{} tau={}",
                        li + 1,
                        index,
                        perm_csv(p.table.iter().map(|&v| u32::from(v)))
                    );
                }
            }
        }
    }
    out
}

pub fn write_ground_truth(path: &Path, gt: &GroundTruth) -> Result<(), FormatError> {
    fs::write(path, ground_truth_to_string(gt))?;
    Ok(())
}

/// Everything a ground-truth file stores, re-read. Representations are
/// indexed `[level][index]`; labels are per-node most-specific ids.
#[derive(Debug, Clone)]
pub struct GroundTruthFile {
    pub header: DataHeader,
    pub reps: Vec<Vec<Representation>>,
    pub node_labels: Vec<(NodeRef, LabelId)>,
    pub rewiring: Vec<(u32, Perm)>,
    pub edge_perms: Vec<(NodeRef, Perm)>,
    pub edge_pair_perms: Vec<(NodeRef, PairPerm)>,
}

pub fn read_ground_truth(path: &Path) -> Result<GroundTruthFile, FormatError> {
    ground_truth_from_str(&fs::read_to_string(path)?)
}

pub fn ground_truth_from_str(text: &str) -> Result<GroundTruthFile, FormatError> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let header = parse_header(first)?;
    let tree = TreeTopology::new(header.d, header.h)
        .map_err(|e| parse_err(1, format!("bad tree parameters: {e}")))?;
    let mut reps: Vec<Vec<Representation>> = (0..=header.h)
        .map(|l| vec![Representation::new(vec![]); tree.level_size(l) as usize])
        .collect();
    let mut node_labels = Vec::new();
    let mut rewiring = Vec::new();
    let mut edge_perms = Vec::new();
    let mut edge_pair_perms = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("rewire ") {
            let (lvl, perm) = rest
                .split_once(' ')
                .ok_or_else(|| parse_err(line_no, "malformed rewire line"))?;
            let level =
                lvl.parse::<u32>().map_err(|_| parse_err(line_no, "bad rewire level"))?;
            let table = perm
                .split(',')
                .map(|t| t.parse::<u32>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| parse_err(line_no, "bad rewire permutation"))?;
            rewiring.push((level, Perm(table)));
        } else if let Some(rest) = line.strip_prefix("edge ") {
            let (node_tok, payload) = rest
                .split_once(' ')
                .ok_or_else(|| parse_err(line_no, "malformed edge line"))?;
            let node = parse_node(line_no, node_tok)?;
            if let Some(v) = payload.strip_prefix("sigma=") {
                let table = v
                    .split(',')
                    .map(|t| t.parse::<u32>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| parse_err(line_no, "bad sigma"))?;
                edge_perms.push((node, Perm(table)));
            } else if let Some(v) = payload.strip_prefix("tau=") {
                let table = v
                    .split(',')
                    .map(|t| t.parse::<u16>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| parse_err(line_no, "bad tau"))?;
                edge_pair_perms.push((node, PairPerm { q: header.q, table }));
            } else {
                return Err(parse_err(line_no, "edge line without sigma= or tau="));
            }
        } else {
            let (node, rep, label) = parse_row(line_no, line, &header)?;
            if !tree.contains(node) {
                return Err(parse_err(line_no, format!("node {node} outside the tree")));
            }
            reps[node.level as usize][node.index as usize] = rep;
            if let Some(l) = label {
                node_labels.push((node, l));
            }
        }
    }
    Ok(GroundTruthFile { header, reps, node_labels, rewiring, edge_perms, edge_pair_perms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{random_rewiring, ModelParams};
    use crate::par::Parallelism;
    use crate::sample::{generate_instance, make_dataset, sample_fim, with_instance, InstanceSpec, RootSpec};
    use crate::tree::build_tree;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dataset_round_trip_is_byte_identical() {
        let tree = build_tree(2, 4).unwrap();
        let p = ModelParams::new(ModelVariant::Iidm, 4, 6, 0.8, 5);
        let gt = crate::sample::sample_iidm(&tree, &p, RootSpec::Uniform, Parallelism::Sequential)
            .unwrap();
        let (labels, s) = generate_instance(&tree, InstanceSpec { h0: 1, h1: 2 }, 5).unwrap();
        let gt = with_instance(gt, labels, s);
        let data = make_dataset(&gt).unwrap();
        let text = dataset_to_string(&data);
        let back = dataset_from_str(&text).unwrap();
        assert_eq!(dataset_to_string(&back), text);
        assert_eq!(back, data);
    }

    #[test]
    fn reader_rejects_bad_rows() {
        let good = "HTL1 d=2 h=1 q=2 k=2 model=IIDM\n1:0 0,1 -\n1:1 1,0 3\n";
        assert!(dataset_from_str(good).is_ok());
        let bad_letter = "HTL1 d=2 h=1 q=2 k=2 model=IIDM\n1:0 0,2 -\n1:1 1,0 3\n";
        assert!(dataset_from_str(bad_letter).is_err());
        let bad_k = "HTL1 d=2 h=1 q=2 k=2 model=IIDM\n1:0 0,1,0 -\n1:1 1,0 3\n";
        assert!(dataset_from_str(bad_k).is_err());
        let duplicate = "HTL1 d=2 h=1 q=2 k=2 model=IIDM\n1:0 0,1 -\n1:0 1,0 3\n";
        assert!(dataset_from_str(duplicate).is_err());
        let missing = "HTL1 d=2 h=1 q=2 k=2 model=IIDM\n1:0 0,1 -\n";
        assert!(dataset_from_str(missing).is_err());
    }

    #[test]
    fn ground_truth_round_trip_fim() {
        let tree = build_tree(3, 2).unwrap();
        let mut p = ModelParams::new(ModelVariant::Fim, 2, 4, 0.7, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        p.rewiring = Some(vec![random_rewiring(4, &mut rng), random_rewiring(4, &mut rng)]);
        let gt = sample_fim(&tree, &p, RootSpec::Uniform, Parallelism::Sequential).unwrap();
        let text = ground_truth_to_string(&gt);
        let file = ground_truth_from_str(&text).unwrap();
        assert_eq!(file.reps, gt.reps);
        assert_eq!(file.rewiring.len(), 2);
        assert_eq!(file.edge_pair_perms.len(), 12);
        for (node, tau) in &file.edge_pair_perms {
            assert_eq!(tau, gt.edge_pair_perm(*node).unwrap());
        }
    }
}

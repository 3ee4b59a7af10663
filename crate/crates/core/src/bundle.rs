//! On-disk model bundles.
//!
//! A bundle is a directory:
//!
//! * `taxonomy.txt`: edge list of the taxonomy the model predicts over
//! * `meta.txt`: `key=value` lines
//! * `models.txt`: per model, a header `node <id> C <c> nnz <k>` followed by
//!   one line of `idx:weight` pairs (1-based indices)
//! * `codebook.txt`: ECOC bundles only
//!
//! Weights are written with 17 significant digits, which round-trips every
//! `f64` exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::ecoc::{CodeBook, EcocModel};
use crate::error::{Error, Result};
use crate::linreg::WeightVector;
use crate::pipeline::{Method, Predictor, TrainRun, PRUNE_BELOW};
use crate::taxonomy::{NodeId, Taxonomy};
use crate::topdown::{HierModel, NodeModel};

pub const TAXONOMY_FILE: &str = "taxonomy.txt";
pub const META_FILE: &str = "meta.txt";
pub const MODELS_FILE: &str = "models.txt";
pub const CODEBOOK_FILE: &str = "codebook.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub method: Method,
    /// Taxonomy the predictor works over (root → leaves for flat methods).
    pub taxonomy: Taxonomy,
    pub predictor: Predictor,
    pub meta: BTreeMap<String, String>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptBundle(msg.into())
}

fn write_weights(out: &mut String, id: usize, c: f64, w: &WeightVector) {
    let nz: Vec<(usize, f64)> = w
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() >= PRUNE_BELOW)
        .map(|(i, &v)| (i + 1, v))
        .collect();
    let _ = writeln!(out, "node {id} C {c} nnz {}", nz.len());
    let pairs: Vec<String> = nz.iter().map(|(i, v)| format!("{i}:{v:.16e}")).collect();
    out.push_str(&pairs.join(" "));
    out.push('\n');
}

struct Entry {
    id: u64,
    c: f64,
    weights: WeightVector,
}

fn parse_models(text: &str, dim: usize) -> Result<Vec<Entry>> {
    let mut lines = text.lines().enumerate();
    let mut out = Vec::new();
    while let Some((ln, header)) = lines.next() {
        if header.trim().is_empty() {
            continue;
        }
        let bad = |m: &str| corrupt(format!("{MODELS_FILE} line {}: {m}", ln + 1));
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.len() != 6 || f[0] != "node" || f[2] != "C" || f[4] != "nnz" {
            return Err(bad("expected `node <id> C <c> nnz <k>`"));
        }
        let id: u64 = f[1].parse().map_err(|_| bad("bad node id"))?;
        let c: f64 = f[3].parse().map_err(|_| bad("bad C"))?;
        let nnz: usize = f[5].parse().map_err(|_| bad("bad nnz"))?;
        let body = lines.next().map(|(_, l)| l).unwrap_or("");
        let mut w = vec![0.0; dim];
        let mut count = 0;
        for tok in body.split_whitespace() {
            let (i, v) = tok.split_once(':').ok_or_else(|| bad("expected idx:weight"))?;
            let i: usize = i.parse().map_err(|_| bad("bad index"))?;
            let v: f64 = v.parse().map_err(|_| bad("bad weight"))?;
            if i == 0 || i > dim {
                return Err(bad("weight index outside the model dimension"));
            }
            w[i - 1] = v;
            count += 1;
        }
        if count != nnz {
            return Err(bad("nnz does not match the weight line"));
        }
        out.push(Entry {
            id,
            c,
            weights: WeightVector(w),
        });
    }
    Ok(out)
}

fn kind(p: &Predictor) -> &'static str {
    match p {
        Predictor::TopDown(_) => "topdown",
        Predictor::Flat(_) => "flat",
        Predictor::Ecoc { .. } => "ecoc",
    }
}

fn id_list<I: IntoIterator<Item = T>, T: ToString>(it: I) -> String {
    it.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl Bundle {
    pub fn from_run(run: &TrainRun) -> Self {
        let mut meta = run.meta.clone();
        meta.insert("model_kind".into(), kind(&run.predictor).into());
        if let Predictor::TopDown(h) | Predictor::Flat(h) = &run.predictor {
            meta.insert(
                "untrainable_nodes".into(),
                id_list(h.models.values().filter(|m| m.untrainable).map(|m| m.node)),
            );
        }
        if let Predictor::Ecoc { model, .. } = &run.predictor {
            meta.insert(
                "degenerate_bits".into(),
                id_list((0..model.degenerate.len()).filter(|&b| model.degenerate[b])),
            );
        }
        Bundle {
            method: run.config.method,
            taxonomy: run.taxonomy.clone(),
            predictor: run.predictor.clone(),
            meta,
        }
    }

    /// File name → contents.
    pub fn render(&self) -> BTreeMap<&'static str, String> {
        let mut files = BTreeMap::new();
        let mut meta = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(meta, "{k}={v}");
        }
        files.insert(META_FILE, meta);
        files.insert(TAXONOMY_FILE, self.taxonomy.to_edge_text());
        let mut models = String::new();
        match &self.predictor {
            Predictor::TopDown(h) | Predictor::Flat(h) => {
                for m in h.models.values() {
                    write_weights(&mut models, m.node as usize, m.c_used, &m.weights);
                }
            }
            Predictor::Ecoc { model, book, .. } => {
                for (b, w) in model.bit_models.iter().enumerate() {
                    write_weights(&mut models, b, model.c_used[b], w);
                }
                files.insert(CODEBOOK_FILE, book.to_text());
            }
        }
        files.insert(MODELS_FILE, models);
        files
    }

    /// Writes every file. Contents are rendered before the first write.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let files = self.render();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, text) in files {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
        };
        let meta: BTreeMap<String, String> = read(META_FILE)?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split_once('=')
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .ok_or_else(|| corrupt(format!("{META_FILE}: expected key=value, got {l:?}")))
            })
            .collect::<Result<_>>()?;
        let get = |k: &str| meta.get(k).ok_or_else(|| corrupt(format!("{META_FILE}: missing {k}")));
        let method: Method = get("method")?.parse().map_err(|_| corrupt("unknown method"))?;
        let dim: usize = get("dim")?.parse().map_err(|_| corrupt("bad dim"))?;
        let taxonomy =
            Taxonomy::parse(&read(TAXONOMY_FILE)?).map_err(|e| corrupt(format!("{TAXONOMY_FILE}: {e}")))?;
        let entries = parse_models(&read(MODELS_FILE)?, dim)?;
        let ids = |key: &str| -> Result<BTreeSet<u64>> {
            meta.get(key)
                .map(|s| s.split(',').filter(|t| !t.is_empty()).collect::<Vec<_>>())
                .unwrap_or_default()
                .into_iter()
                .map(|t| t.parse().map_err(|_| corrupt(format!("{META_FILE}: bad {key}"))))
                .collect()
        };

        let predictor = match get("model_kind")?.as_str() {
            k @ ("topdown" | "flat") => {
                let untrainable = ids("untrainable_nodes")?;
                let mut models = BTreeMap::new();
                for e in entries {
                    let node = NodeId::try_from(e.id).map_err(|_| corrupt("node id out of range"))?;
                    models.insert(
                        node,
                        NodeModel {
                            node,
                            weights: e.weights,
                            c_used: e.c,
                            fstar: None,
                            untrainable: untrainable.contains(&e.id),
                        },
                    );
                }
                let expected: Vec<NodeId> = taxonomy.non_root_nodes().collect();
                if !models.keys().copied().eq(expected.iter().copied()) {
                    return Err(corrupt("models do not match the taxonomy's non-root nodes"));
                }
                let h = HierModel {
                    taxonomy: taxonomy.clone(),
                    models,
                    dim,
                };
                if k == "topdown" {
                    Predictor::TopDown(h)
                } else {
                    Predictor::Flat(h)
                }
            }
            "ecoc" => {
                let book = CodeBook::parse(&read(CODEBOOK_FILE)?)?;
                if book.class_ids().iter().copied().collect::<BTreeSet<_>>() != *taxonomy.leaves() {
                    return Err(corrupt("codebook classes do not match the taxonomy leaves"));
                }
                if entries.len() != book.width() || entries.iter().enumerate().any(|(b, e)| e.id != b as u64) {
                    return Err(corrupt("bit models do not match the codebook width"));
                }
                let degenerate = ids("degenerate_bits")?;
                let model = EcocModel {
                    degenerate: (0..entries.len()).map(|b| degenerate.contains(&(b as u64))).collect(),
                    c_used: entries.iter().map(|e| e.c).collect(),
                    bit_models: entries.into_iter().map(|e| e.weights).collect(),
                };
                Predictor::Ecoc { model, book, dim }
            }
            other => return Err(corrupt(format!("unknown model kind {other:?}"))),
        };
        Ok(Bundle {
            method,
            taxonomy,
            predictor,
            meta,
        })
    }
}

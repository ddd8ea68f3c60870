//! Plain-text file formats.
//!
//! Network file:
//!
//! ```text
//! plsm-network 1
//! <n> <K>
//! pair <i> <j> <m>
//! <K binary digits>        (m lines, one per document)
//! ...
//! ```
//!
//! Pairs that are not listed carry one all-zero document; the writer omits
//! exactly those pairs. Blank lines and lines starting with `#` are ignored.
//!
//! Model file:
//!
//! ```text
//! plsm-model 1
//! <n> <K> <d>
//! meta <key> <value>       (any number)
//! a
//! <n lines, one baseline each>
//! W <nnz>
//! <i> <k> <value>          (nnz lines, nonzero entries only)
//! U
//! <n lines of d values>
//! ```
//!
//! Floats are written in Rust's shortest round-trip notation, so a model
//! read back is bit-identical to the one written.
//!
//! CSV outputs (all with a header row):
//!
//! | file        | columns                                              |
//! |-------------|------------------------------------------------------|
//! | trace       | `iter,objective,step_a,step_w,step_u[,e_t]`          |
//! | predictions | `i,j,l,k,prob`                                       |
//! | PR curve    | `threshold,precision,recall`                         |
//! | CV grid     | `d,s,mean_deviance,selected,status,fold_0,...`       |

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{PlsmError, Result};
use crate::metrics::PrCurve;
use crate::model::ModelParams;
use crate::network::{Cell, MultiEdgeNetwork, NetworkBuilder};
use crate::optim::IterTrace;
use crate::tuning::CvResult;

const NETWORK_MAGIC: &str = "plsm-network";
const MODEL_MAGIC: &str = "plsm-model";
const FORMAT_VERSION: u32 = 1;

/// Line reader that skips blanks and comments and remembers line numbers.
struct Lines<R> {
    inner: std::io::Lines<R>,
    path: PathBuf,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn new(reader: R, path: &Path) -> Self {
        Self {
            inner: reader.lines(),
            path: path.to_path_buf(),
            line: 0,
        }
    }

    fn err(&self, msg: impl Into<String>) -> PlsmError {
        PlsmError::Parse {
            path: self.path.clone(),
            line: self.line,
            msg: msg.into(),
        }
    }

    fn next_line(&mut self) -> Result<Option<String>> {
        for l in self.inner.by_ref() {
            self.line += 1;
            let l = l.map_err(|e| PlsmError::io(&self.path, e))?;
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Ok(Some(t.to_string()));
        }
        Ok(None)
    }

    fn expect_line(&mut self, what: &str) -> Result<String> {
        self.next_line()?
            .ok_or_else(|| self.err(format!("unexpected end of file, expected {what}")))
    }

    fn header(&mut self, magic: &str) -> Result<()> {
        let l = self.expect_line("header")?;
        let mut it = l.split_whitespace();
        if it.next() != Some(magic) {
            return Err(self.err(format!("expected `{magic} {FORMAT_VERSION}` header")));
        }
        let v: u32 = self.parse(it.next(), "format version")?;
        if v != FORMAT_VERSION {
            return Err(self.err(format!("unsupported format version {v}")));
        }
        Ok(())
    }

    fn parse<T: std::str::FromStr>(&self, tok: Option<&str>, what: &str) -> Result<T> {
        let tok = tok.ok_or_else(|| self.err(format!("missing {what}")))?;
        tok.parse()
            .map_err(|_| self.err(format!("cannot parse {what} from `{tok}`")))
    }

    fn float(&self, tok: Option<&str>, what: &str) -> Result<f64> {
        let v: f64 = self.parse(tok, what)?;
        if !v.is_finite() {
            return Err(self.err(format!("{what} is not finite")));
        }
        Ok(v)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| PlsmError::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| PlsmError::io(path, e))
}

pub fn write_network(net: &MultiEdgeNetwork, out: &mut impl Write) -> std::io::Result<()> {
    let k = net.n_topics();
    writeln!(out, "{NETWORK_MAGIC} {FORMAT_VERSION}")?;
    writeln!(out, "{} {}", net.n(), k)?;
    let mut row = String::with_capacity(k);
    for (i, j) in net.pairs() {
        let block = net.block(i, j).expect("pair from the network");
        if block.len() == k && block.iter().all(|&y| y == 0) {
            continue;
        }
        writeln!(out, "pair {i} {j} {}", block.len() / k)?;
        for doc in block.chunks(k) {
            row.clear();
            row.extend(doc.iter().map(|&y| if y != 0 { '1' } else { '0' }));
            writeln!(out, "{row}")?;
        }
    }
    Ok(())
}

/// Reads a network; `path` is used in error messages only.
pub fn read_network(reader: impl BufRead, path: &Path) -> Result<MultiEdgeNetwork> {
    let mut lines = Lines::new(reader, path);
    lines.header(NETWORK_MAGIC)?;
    let dims = lines.expect_line("`n K`")?;
    let mut it = dims.split_whitespace();
    let n: usize = lines.parse(it.next(), "n")?;
    let k: usize = lines.parse(it.next(), "K")?;
    let mut builder = NetworkBuilder::new(n, k).map_err(|e| lines.err(e.to_string()))?;
    while let Some(l) = lines.next_line()? {
        let mut it = l.split_whitespace();
        if it.next() != Some("pair") {
            return Err(lines.err("expected `pair i j m`"));
        }
        let i: usize = lines.parse(it.next(), "i")?;
        let j: usize = lines.parse(it.next(), "j")?;
        let m: usize = lines.parse(it.next(), "m")?;
        if builder.has_pair(i, j) {
            return Err(lines.err(format!("pair ({i}, {j}) listed twice")));
        }
        let mut rows = Vec::with_capacity(m * k);
        for _ in 0..m {
            let doc = lines.expect_line("document row")?;
            if doc.len() != k {
                return Err(lines.err(format!("document row has {} entries, expected {k}", doc.len())));
            }
            for ch in doc.chars() {
                match ch {
                    '0' => rows.push(0),
                    '1' => rows.push(1),
                    _ => return Err(lines.err(format!("`{ch}` is not a binary outcome"))),
                }
            }
        }
        builder.pair(i, j, rows).map_err(|e| lines.err(e.to_string()))?;
    }
    builder.build()
}

pub fn save_network(net: &MultiEdgeNetwork, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    write_network(net, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| PlsmError::io(path, e))
}

pub fn load_network(path: &Path) -> Result<MultiEdgeNetwork> {
    read_network(open(path)?, path)
}

/// Parameters plus free-form `key value` metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile {
    pub params: ModelParams,
    pub meta: BTreeMap<String, String>,
}

impl ModelFile {
    pub fn new(params: ModelParams) -> Self {
        Self {
            params,
            meta: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }
}

pub fn write_model(model: &ModelFile, out: &mut impl Write) -> std::io::Result<()> {
    let p = &model.params;
    writeln!(out, "{MODEL_MAGIC} {FORMAT_VERSION}")?;
    writeln!(out, "{} {} {}", p.n(), p.n_topics(), p.dim())?;
    for (key, value) in &model.meta {
        writeln!(out, "meta {key} {value}")?;
    }
    writeln!(out, "a")?;
    for v in p.a.iter() {
        writeln!(out, "{v:?}")?;
    }
    writeln!(out, "W {}", p.w_nnz())?;
    for i in 0..p.n() {
        for k in 0..p.n_topics() {
            let v = p.w[(i, k)];
            if v != 0.0 {
                writeln!(out, "{i} {k} {v:?}")?;
            }
        }
    }
    writeln!(out, "U")?;
    for i in 0..p.n() {
        let row: Vec<String> = p.u.row(i).iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn read_model(reader: impl BufRead, path: &Path) -> Result<ModelFile> {
    let mut lines = Lines::new(reader, path);
    lines.header(MODEL_MAGIC)?;
    let dims = lines.expect_line("`n K d`")?;
    let mut it = dims.split_whitespace();
    let n: usize = lines.parse(it.next(), "n")?;
    let k: usize = lines.parse(it.next(), "K")?;
    let d: usize = lines.parse(it.next(), "d")?;

    let mut meta = BTreeMap::new();
    let mut l = lines.expect_line("`a`")?;
    while let Some(rest) = l.strip_prefix("meta ") {
        let rest = rest.trim_start();
        let (key, value) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
        meta.insert(key.to_string(), value.trim().to_string());
        l = lines.expect_line("`a`")?;
    }
    if l != "a" {
        return Err(lines.err("expected `a`"));
    }
    let mut a = DVector::zeros(n);
    for i in 0..n {
        let l = lines.expect_line("baseline")?;
        a[i] = lines.float(Some(l.as_str()), "baseline")?;
    }

    let l = lines.expect_line("`W nnz`")?;
    let mut it = l.split_whitespace();
    if it.next() != Some("W") {
        return Err(lines.err("expected `W nnz`"));
    }
    let nnz: usize = lines.parse(it.next(), "nnz")?;
    let mut w = DMatrix::zeros(n, k);
    for _ in 0..nnz {
        let l = lines.expect_line("W entry")?;
        let mut it = l.split_whitespace();
        let i: usize = lines.parse(it.next(), "row")?;
        let c: usize = lines.parse(it.next(), "topic")?;
        let v = lines.float(it.next(), "weight")?;
        if i >= n || c >= k {
            return Err(lines.err(format!("W entry ({i}, {c}) out of range")));
        }
        w[(i, c)] = v;
    }

    if lines.expect_line("`U`")? != "U" {
        return Err(lines.err("expected `U`"));
    }
    let mut u = DMatrix::zeros(n, d);
    for i in 0..n {
        let l = lines.expect_line("latent position")?;
        let vals: Vec<&str> = l.split_whitespace().collect();
        if vals.len() != d {
            return Err(lines.err(format!("latent position has {} values, expected {d}", vals.len())));
        }
        for (c, tok) in vals.into_iter().enumerate() {
            u[(i, c)] = lines.float(Some(tok), "latent coordinate")?;
        }
    }
    if lines.next_line()?.is_some() {
        return Err(lines.err("trailing content after U"));
    }
    let params = ModelParams::new(a, w, u).map_err(|e| lines.err(e.to_string()))?;
    Ok(ModelFile { params, meta })
}

pub fn save_model(model: &ModelFile, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    write_model(model, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| PlsmError::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    read_model(open(path)?, path)
}

fn csv_err(path: &Path, e: csv::Error) -> PlsmError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    PlsmError::Parse {
        path: path.to_path_buf(),
        line,
        msg: e.to_string(),
    }
}

pub fn write_trace(trace: &IterTrace, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header = vec!["iter", "objective", "step_a", "step_w", "step_u"];
    if trace.error.is_some() {
        header.push("e_t");
    }
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (t, (f, st)) in trace.objective.iter().zip(&trace.steps).enumerate() {
        let mut rec = vec![
            t.to_string(),
            format!("{f:?}"),
            format!("{:?}", st.a),
            format!("{:?}", st.w),
            format!("{:?}", st.u),
        ];
        if let Some(e) = &trace.error {
            rec.push(format!("{:?}", e[t]));
        }
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| PlsmError::io(path, e))
}

/// One predicted cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub i: usize,
    pub j: usize,
    pub l: usize,
    pub k: usize,
    pub prob: f64,
}

impl Prediction {
    pub fn cell(&self) -> Cell {
        Cell {
            i: self.i,
            j: self.j,
            l: self.l,
            k: self.k,
        }
    }
}

pub fn write_predictions(preds: &[Prediction], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for p in preds {
        w.serialize(p).map_err(|e| csv_err(path, e))?;
    }
    if preds.is_empty() {
        w.write_record(["i", "j", "l", "k", "prob"])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| PlsmError::io(path, e))
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| csv_err(path, e)))
        .collect()
}

pub fn write_pr_curve(curve: &PrCurve, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["threshold", "precision", "recall"])
        .map_err(|e| csv_err(path, e))?;
    for p in &curve.points {
        w.write_record(&[
            format!("{:?}", p.threshold),
            format!("{:?}", p.precision),
            format!("{:?}", p.recall),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| PlsmError::io(path, e))
}

/// One row per `(d, s)` candidate.
pub fn write_cv_grid(cv: &CvResult, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header: Vec<String> = ["d", "s", "mean_deviance", "selected", "status"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..cv.folds).map(|f| format!("fold_{f}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for c in &cv.candidates {
        let mut rec = vec![
            c.d.to_string(),
            c.s.to_string(),
            c.mean_deviance.map_or(String::new(), |v| format!("{v:?}")),
            ((c.d, c.s) == cv.selected).to_string(),
            c.failure.clone().unwrap_or_else(|| "ok".into()),
        ];
        for f in 0..cv.folds {
            rec.push(c.fold_deviance.get(f).map_or(String::new(), |v| format!("{v:?}")));
        }
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| PlsmError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn small_net() -> MultiEdgeNetwork {
        let mut b = NetworkBuilder::new(3, 2).unwrap();
        b.pair(0, 1, vec![1, 0, 0, 1]).unwrap();
        b.pair(1, 2, vec![0, 0]).unwrap();
        b.build().unwrap()
    }

    #[test]
    fn network_text_layout() {
        let mut buf = Vec::new();
        write_network(&small_net(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "plsm-network 1\n3 2\npair 0 1 2\n10\n01\n");
    }

    #[test]
    fn network_round_trip() {
        let net = small_net();
        let mut buf = Vec::new();
        write_network(&net, &mut buf).unwrap();
        let back = read_network(buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn network_parse_errors() {
        let bad = [
            "plsm-network 2\n2 1\n",
            "nope 1\n2 1\n",
            "plsm-network 1\n2 1\npair 0 1 1\n2\n",
            "plsm-network 1\n2 2\npair 0 1 1\n1\n",
            "plsm-network 1\n2 1\npair 0 1 1\n1\npair 1 0 1\n0\n",
            "plsm-network 1\n2 1\npair 0 0 1\n1\n",
            "plsm-network 1\n2 1\npair 0 1 2\n1\n",
        ];
        for text in bad {
            assert!(
                read_network(text.as_bytes(), Path::new("mem")).is_err(),
                "accepted {text:?}"
            );
        }
    }

    #[test]
    fn parse_error_reports_line() {
        let text = "plsm-network 1\n# comment\n2 1\npair 0 1 1\nx\n";
        match read_network(text.as_bytes(), Path::new("f.txt")) {
            Err(PlsmError::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn model_round_trip_is_bit_exact() {
        let third = 1.0f64 / 3.0;
        let r = (1.0 - third * third).sqrt();
        let params = ModelParams::new(
            dvector![-1.234_567_890_123_456_7, 1e-300, -0.0],
            dmatrix![0.0, 2.5; 1.0 / 7.0, 0.0; 0.0, 0.0],
            dmatrix![third, r; 1.0, 0.0; 0.6, -0.8],
        )
        .unwrap();
        let model = ModelFile::new(params).with_meta("seed", 7).with_meta("note", "two words");
        let mut buf = Vec::new();
        write_model(&model, &mut buf).unwrap();
        let back = read_model(buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back.meta, model.meta);
        let bits = |p: &ModelParams| -> Vec<u64> {
            p.a.iter()
                .chain(p.w.iter())
                .chain(p.u.iter())
                .map(|v| v.to_bits())
                .collect()
        };
        assert_eq!(bits(&back.params), bits(&model.params));
    }

    #[test]
    fn model_rejects_invalid_content() {
        let good = "plsm-model 1\n2 1 1\na\n0\n0\nW 1\n0 0 1.5\nU\n1\n-1\n";
        assert!(read_model(good.as_bytes(), Path::new("m")).is_ok());
        let negative_w = good.replace("0 0 1.5", "0 0 -1.5");
        let short_row = good.replace("U\n1\n", "U\n0.5\n");
        let nan = good.replace("a\n0\n", "a\nNaN\n");
        let trailing = format!("{good}1\n");
        for text in [negative_w, short_row, nan, trailing] {
            assert!(read_model(text.as_bytes(), Path::new("m")).is_err(), "{text}");
        }
    }
}

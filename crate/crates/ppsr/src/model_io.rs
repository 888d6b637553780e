//! On-disk formats. All files are UTF-8 text, written atomically
//! (temp file + rename).
//!
//! Factor model (`*.fm`):
//!
//! ```text
//! ppsr-factor-model v1
//! m=<items> k=<clusters> n_v=<views>
//! view <s> n=<columns> norm=<input frobenius norm>
//! W
//! <m rows of k tab-separated floats>
//! H
//! <k rows of n tab-separated floats>
//! ...one block per view...
//! assignment
//! <m tab-separated cluster indices>
//! objective-trace
//! <tab-separated objective values per sweep>
//! ```
//!
//! Matrix dump (`*.mtx`): `ppsr-matrix v1`, a `rows=<m> cols=<n>` line, then
//! row-major tab-separated values.
//!
//! Similarity tables: TSV with a `target?other?score` header row.
//!
//! Paillier keys: `ppsr-paillier-pk v1` / `ppsr-paillier-sk v1` headers with
//! `bits=`, `n=` (and `lambda=`, `mu=` for the secret file) in lowercase hex.
//! Floats round-trip exactly through Rust's shortest-representation display.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use num_bigint::BigUint;
use ppsr_core::nmf::FactorModel;
use ppsr_core::paillier::Keypair;

use crate::error::DataError;

/// Write via a temporary sibling then rename, so readers never observe a
/// partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), DataError> {
    let tmp = path.with_extension("tmp");
    let io_err = |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    };
    std::fs::write(&tmp, contents).map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(io_err)?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String, DataError> {
    if !path.exists() {
        return Err(DataError::MissingFile(path.to_path_buf()));
    }
    std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn malformed(path: &Path, line: usize, message: impl Into<String>) -> DataError {
    DataError::Malformed {
        file: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn matrix_lines(out: &mut String, matrix: &Array2<f64>) {
    for row in matrix.rows() {
        let mut first = true;
        for value in row {
            if !first {
                out.push('\t');
            }
            let _ = write!(out, "{value}");
            first = false;
        }
        out.push('\n');
    }
}

pub fn factor_model_to_string(model: &FactorModel) -> String {
    let mut out = String::new();
    let m = model.items();
    let _ = writeln!(out, "ppsr-factor-model v1");
    let _ = writeln!(out, "m={m} k={} n_v={}", model.k, model.n_views());
    for s in 0..model.n_views() {
        let _ = writeln!(
            out,
            "view {s} n={} norm={}",
            model.h[s].ncols(),
            model.input_norms[s]
        );
        out.push_str("W\n");
        matrix_lines(&mut out, &model.w[s]);
        out.push_str("H\n");
        matrix_lines(&mut out, &model.h[s]);
    }
    out.push_str("assignment\n");
    let assignment: Vec<String> = model.assignment.iter().map(|a| a.to_string()).collect();
    let _ = writeln!(out, "{}", assignment.join("\t"));
    out.push_str("objective-trace\n");
    let trace: Vec<String> = model.objective_trace.iter().map(|v| v.to_string()).collect();
    let _ = writeln!(out, "{}", trace.join("\t"));
    out
}

pub fn write_factor_model(path: &Path, model: &FactorModel) -> Result<(), DataError> {
    write_atomic(path, &factor_model_to_string(model))
}

struct LineReader<'a> {
    path: &'a Path,
    lines: Vec<&'a str>,
    pos: usize,
}

impl<'a> LineReader<'a> {
    fn next(&mut self) -> Result<(usize, &'a str), DataError> {
        let line = self
            .lines
            .get(self.pos)
            .copied()
            .ok_or_else(|| malformed(self.path, self.pos + 1, "unexpected end of file"))?;
        self.pos += 1;
        Ok((self.pos, line))
    }

    fn expect(&mut self, expected: &str) -> Result<(), DataError> {
        let (line_no, line) = self.next()?;
        if line != expected {
            return Err(malformed(
                self.path,
                line_no,
                format!("expected {expected:?}, found {line:?}"),
            ));
        }
        Ok(())
    }

    fn floats(&mut self, count: usize) -> Result<Vec<f64>, DataError> {
        let (line_no, line) = self.next()?;
        let values: Result<Vec<f64>, _> = line.split('\t').map(str::parse).collect();
        let values =
            values.map_err(|e| malformed(self.path, line_no, format!("bad float: {e}")))?;
        if values.len() != count {
            return Err(malformed(
                self.path,
                line_no,
                format!("expected {count} values, found {}", values.len()),
            ));
        }
        Ok(values)
    }
}

fn read_matrix(reader: &mut LineReader, rows: usize, cols: usize) -> Result<Array2<f64>, DataError> {
    let mut flat = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        flat.extend(reader.floats(cols)?);
    }
    Ok(Array2::from_shape_vec((rows, cols), flat).expect("shape checked per row"))
}

pub fn read_factor_model(path: &Path) -> Result<FactorModel, DataError> {
    let text = read_text(path)?;
    let mut reader = LineReader {
        path,
        lines: text.lines().collect(),
        pos: 0,
    };
    reader.expect("ppsr-factor-model v1")?;
    let (line_no, header) = reader.next()?;
    let mut m = None;
    let mut k = None;
    let mut n_v = None;
    for part in header.split_whitespace() {
        if let Some(v) = part.strip_prefix("m=") {
            m = v.parse::<usize>().ok();
        } else if let Some(v) = part.strip_prefix("k=") {
            k = v.parse::<usize>().ok();
        } else if let Some(v) = part.strip_prefix("n_v=") {
            n_v = v.parse::<usize>().ok();
        }
    }
    let (m, k, n_v) = match (m, k, n_v) {
        (Some(m), Some(k), Some(n_v)) if m > 0 && k > 0 && n_v > 0 => (m, k, n_v),
        _ => return Err(malformed(path, line_no, "bad model header")),
    };
    let mut w = Vec::with_capacity(n_v);
    let mut h = Vec::with_capacity(n_v);
    let mut input_norms = Vec::with_capacity(n_v);
    for s in 0..n_v {
        let (line_no, view_header) = reader.next()?;
        let mut n = None;
        let mut norm = None;
        let mut ok = false;
        let mut parts = view_header.split_whitespace();
        if parts.next() == Some("view") {
            if let Some(idx) = parts.next().and_then(|v| v.parse::<usize>().ok()) {
                ok = idx == s;
            }
        }
        for part in view_header.split_whitespace() {
            if let Some(v) = part.strip_prefix("n=") {
                n = v.parse::<usize>().ok();
            } else if let Some(v) = part.strip_prefix("norm=") {
                norm = v.parse::<f64>().ok();
            }
        }
        let (n, norm) = match (ok, n, norm) {
            (true, Some(n), Some(norm)) if n > 0 => (n, norm),
            _ => return Err(malformed(path, line_no, "bad view header")),
        };
        reader.expect("W")?;
        w.push(read_matrix(&mut reader, m, k)?);
        reader.expect("H")?;
        h.push(read_matrix(&mut reader, k, n)?);
        input_norms.push(norm);
    }
    reader.expect("assignment")?;
    let assignment: Vec<usize> = reader
        .floats(m)?
        .into_iter()
        .map(|v| v as usize)
        .collect();
    reader.expect("objective-trace")?;
    let (line_no, line) = reader.next()?;
    let trace: Result<Vec<f64>, _> = line.split('\t').map(str::parse).collect();
    let objective_trace =
        trace.map_err(|e| malformed(path, line_no, format!("bad float: {e}")))?;
    Ok(FactorModel {
        w,
        h,
        k,
        objective_trace,
        assignment,
        input_norms,
    })
}

pub fn matrix_to_string(matrix: &Array2<f64>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "ppsr-matrix v1");
    let _ = writeln!(out, "rows={} cols={}", matrix.nrows(), matrix.ncols());
    matrix_lines(&mut out, matrix);
    out
}

pub fn write_matrix(path: &Path, matrix: &Array2<f64>) -> Result<(), DataError> {
    write_atomic(path, &matrix_to_string(matrix))
}

pub fn similarity_table_to_string(target: &str, table: &[(String, f64)]) -> String {
    let mut out = String::from("target\tother\tscore\n");
    for (other, score) in table {
        let _ = writeln!(out, "{target}\t{other}\t{score:.6}");
    }
    out
}

pub fn write_public_key(path: &Path, keypair: &Keypair) -> Result<(), DataError> {
    let pk = keypair.public();
    let contents = format!(
        "ppsr-paillier-pk v1\nbits={}\nn={:x}\n",
        pk.bits(),
        pk.modulus()
    );
    write_atomic(path, &contents)
}

pub fn write_secret_key(path: &Path, keypair: &Keypair) -> Result<(), DataError> {
    let pk = keypair.public();
    let (lambda, mu) = keypair.secret_parts();
    let contents = format!(
        "ppsr-paillier-sk v1\nbits={}\nn={:x}\nlambda={:x}\nmu={:x}\n",
        pk.bits(),
        pk.modulus(),
        lambda,
        mu
    );
    write_atomic(path, &contents)
}

fn parse_hex_field<'a>(
    path: &Path,
    line_no: usize,
    line: &'a str,
    key: &str,
) -> Result<BigUint, DataError> {
    let value = line
        .strip_prefix(key)
        .ok_or_else(|| malformed(path, line_no, format!("expected {key}...")))?;
    BigUint::parse_bytes(value.as_bytes(), 16)
        .ok_or_else(|| malformed(path, line_no, format!("bad hex value for {key}")))
}

pub fn read_secret_key(path: &Path) -> Result<Keypair, DataError> {
    let text = read_text(path)?;
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() < 5 || lines[0] != "ppsr-paillier-sk v1" {
        return Err(malformed(path, 1, "not a ppsr secret key file"));
    }
    let bits: u64 = lines[1]
        .strip_prefix("bits=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| malformed(path, 2, "bad bits field"))?;
    let n = parse_hex_field(path, 3, lines[2], "n=")?;
    let lambda = parse_hex_field(path, 4, lines[3], "lambda=")?;
    let mu = parse_hex_field(path, 5, lines[4], "mu=")?;
    Ok(Keypair::from_parts(bits, n, lambda, mu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ppsr_core::nmf::{nmf_factorize, MultiViewConfig, ViewMatrix};
    use ppsr_core::paillier::keygen;
    use rand::SeedableRng;
    use tempfile::TempDir;

    #[test]
    fn factor_model_roundtrips_exactly() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(3);
        use rand::Rng;
        let data = Array2::from_shape_fn((6, 5), |_| rng.gen::<f64>());
        let view = ViewMatrix::new(data, 0).unwrap();
        let mut config = MultiViewConfig::new(2, 1);
        config.max_iters = 20;
        let model = nmf_factorize(&view, 2, &config).unwrap();

        let dir = TempDir::new().unwrap();
        let path = dir.path().join("model.fm");
        write_factor_model(&path, &model).unwrap();
        let loaded = read_factor_model(&path).unwrap();
        assert_eq!(loaded, model);
    }

    #[test]
    fn truncated_model_file_is_rejected_with_line_number() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("model.fm");
        write_atomic(&path, "ppsr-factor-model v1\nm=2 k=1 n_v=1\nview 0 n=2 norm=1\nW\n0.5\n").unwrap();
        let err = read_factor_model(&path).unwrap_err();
        assert!(err.to_string().contains("model.fm:"), "{err}");
    }

    #[test]
    fn secret_key_roundtrips() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(4);
        let keypair = keygen(512, &mut rng).unwrap();
        let dir = TempDir::new().unwrap();
        let sk_path = dir.path().join("test.sk");
        let pk_path = dir.path().join("test.pk");
        write_secret_key(&sk_path, &keypair).unwrap();
        write_public_key(&pk_path, &keypair).unwrap();
        let loaded = read_secret_key(&sk_path).unwrap();
        assert_eq!(loaded, keypair);
        let pk_text = std::fs::read_to_string(&pk_path).unwrap();
        assert!(pk_text.starts_with("ppsr-paillier-pk v1\nbits=512\n"));
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("out.tsv");
        write_atomic(&path, "first").unwrap();
        write_atomic(&path, "second").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "second");
        assert!(!path.with_extension("tmp").exists());
    }
}

//! JSON and CSV file formats.
//!
//! Complex numbers are `[re, im]`, matrices are row-major nested arrays, and
//! every float is written with 17 significant digits so that reading a file
//! back reproduces the stored values bit for bit.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use dirac_core::continuous::{Grid, PhiSamples, PotentialGrid};
use dirac_core::discrete::{BetaSequence, DiscreteDiracSystem};
use dirac_core::linalg::c;
use dirac_core::weyl::WeylTaylorData;
use dirac_core::CMat;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;

use crate::error::CliError;

pub type JsonComplex = [f64; 2];
pub type JsonMatrix = Vec<Vec<JsonComplex>>;

/// `x` in scientific notation with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

struct Digits17;

impl Formatter for Digits17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17);
    value
        .serialize(&mut ser)
        .map_err(|e| CliError::io(format!("serializing output: {e}")))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| CliError::io(e.to_string()))
}

pub fn from_json<T: DeserializeOwned>(text: &str, what: &str) -> Result<T, CliError> {
    serde_json::from_str(text)
        .map_err(|e| CliError::invalid("malformed_json", format!("{what}: {e}")))
}

pub fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::invalid("unreadable_input", format!("{}: {e}", path.display())))?;
    from_json(&text, what)
}

/// Writes to `path`, or to stdout when there is none.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            fs::write(p, contents).map_err(|e| CliError::io(format!("{}: {e}", p.display())))
        }
        None => io::stdout()
            .write_all(contents.as_bytes())
            .map_err(|e| CliError::io(e.to_string())),
    }
}

/// CSV with a header row; floats use [`fmt17`].
pub fn csv_table(header: &[String], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&x| fmt17(x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_to_json(m: &CMat) -> JsonMatrix {
    (0..m.nrows())
        .map(|r| {
            (0..m.ncols())
                .map(|col| [m[(r, col)].re, m[(r, col)].im])
                .collect()
        })
        .collect()
}

pub fn matrix_from_json(
    m: &JsonMatrix,
    rows: usize,
    cols: usize,
    what: &str,
) -> Result<CMat, CliError> {
    if m.len() != rows || m.iter().any(|row| row.len() != cols) {
        return Err(CliError::invalid(
            "shape_mismatch",
            format!("{what}: expected a {rows}x{cols} matrix"),
        ));
    }
    if m.iter().flatten().flatten().any(|x| !x.is_finite()) {
        return Err(CliError::invalid(
            "non_finite",
            format!("{what}: non-finite entry"),
        ));
    }
    Ok(CMat::from_fn(rows, cols, |r, col| {
        c(m[r][col][0], m[r][col][1])
    }))
}

fn matrices_from_json(
    ms: &[JsonMatrix],
    rows: usize,
    cols: usize,
    what: &str,
) -> Result<Vec<CMat>, CliError> {
    ms.iter()
        .enumerate()
        .map(|(k, m)| matrix_from_json(m, rows, cols, &format!("{what}[{k}]")))
        .collect()
}

fn check_length(found: usize, n: usize, what: &str) -> Result<(), CliError> {
    if found != n + 1 {
        return Err(CliError::invalid(
            "length_mismatch",
            format!("{what}: n = {n} needs {} entries, found {found}", n + 1),
        ));
    }
    Ok(())
}

/// Discrete system given by its rows `beta(k)` (`p x 2p`), its coefficients
/// `C_k` (`2p x 2p`), or both; `beta` takes precedence on input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemFile {
    pub p: usize,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<JsonMatrix>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<JsonMatrix>>,
}

impl SystemFile {
    pub fn from_beta(b: &BetaSequence) -> Result<Self, CliError> {
        let sys = dirac_core::discrete::system_from_beta(b)?;
        Ok(Self {
            p: b.p(),
            n: b.n(),
            beta: Some(b.rows().iter().map(matrix_to_json).collect()),
            c: Some(sys.coefficients().iter().map(matrix_to_json).collect()),
        })
    }

    /// Validated rows; from `C_k` the canonical rows are extracted.
    pub fn to_beta(&self) -> Result<BetaSequence, CliError> {
        let p = self.p;
        if p == 0 {
            return Err(CliError::invalid(
                "invalid_block_size",
                "p must be positive".into(),
            ));
        }
        if let Some(beta) = &self.beta {
            check_length(beta.len(), self.n, "beta")?;
            return Ok(BetaSequence::new(
                p,
                matrices_from_json(beta, p, 2 * p, "beta")?,
            )?);
        }
        if let Some(cs) = &self.c {
            check_length(cs.len(), self.n, "c")?;
            let sys = DiscreteDiracSystem::new(p, matrices_from_json(cs, 2 * p, 2 * p, "c")?)?;
            return Ok(sys.canonical_beta()?);
        }
        Err(CliError::invalid(
            "missing_field",
            "system file needs `beta` or `c`".into(),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorFile {
    pub p: usize,
    pub n: usize,
    pub alpha: Vec<JsonMatrix>,
}

impl TaylorFile {
    pub fn from_data(a: &WeylTaylorData) -> Self {
        Self {
            p: a.p(),
            n: a.n(),
            alpha: a.coefficients().iter().map(matrix_to_json).collect(),
        }
    }

    pub fn to_data(&self) -> Result<WeylTaylorData, CliError> {
        if self.p == 0 {
            return Err(CliError::invalid(
                "invalid_block_size",
                "p must be positive".into(),
            ));
        }
        check_length(self.alpha.len(), self.n, "alpha")?;
        Ok(WeylTaylorData::new(
            self.p,
            matrices_from_json(&self.alpha, self.p, self.p, "alpha")?,
        )?)
    }
}

/// Potential on `n + 1` equispaced nodes of `[0, l]`; `m` defaults to the
/// largest node norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialFile {
    pub p: usize,
    pub l: f64,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    pub v: Vec<JsonMatrix>,
}

impl PotentialFile {
    pub fn from_grid(pot: &PotentialGrid) -> Self {
        let g = pot.grid();
        Self {
            p: pot.p(),
            l: g.l,
            n: g.n,
            m: Some(pot.bound()),
            v: pot.values().iter().map(matrix_to_json).collect(),
        }
    }

    pub fn to_grid(&self) -> Result<PotentialGrid, CliError> {
        let grid = Grid::new(self.l, self.n)?;
        check_length(self.v.len(), self.n, "v")?;
        let v = matrices_from_json(&self.v, self.p, self.p, "v")?;
        let m = match self.m {
            Some(m) => m,
            None => v
                .iter()
                .map(dirac_core::linalg::op_norm)
                .fold(0.0, f64::max),
        };
        Ok(PotentialGrid::new(self.p, grid, v, m)?)
    }
}

/// Samples `phi(lambda / 2)` at `lambda = xi - i eta` of a Weyl function on
/// `[0, l]` whose potential is bounded by `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiSamplesFile {
    pub p: usize,
    pub l: f64,
    pub m: f64,
    pub eta: f64,
    pub xi: Vec<f64>,
    pub values: Vec<JsonMatrix>,
}

impl PhiSamplesFile {
    pub fn from_samples(s: &PhiSamples, l: f64, m: f64) -> Self {
        Self {
            p: s.p,
            l,
            m,
            eta: s.eta,
            xi: s.xi.clone(),
            values: s.values.iter().map(matrix_to_json).collect(),
        }
    }

    pub fn to_samples(&self) -> Result<PhiSamples, CliError> {
        if !(self.eta > 2.0 * self.m) {
            return Err(CliError::invalid(
                "half_plane",
                format!(
                    "damping eta = {} must exceed 2M = {}",
                    self.eta,
                    2.0 * self.m
                ),
            ));
        }
        let values = matrices_from_json(&self.values, self.p, self.p, "values")?;
        Ok(PhiSamples::new(self.p, self.eta, self.xi.clone(), values)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use dirac_core::random::random_beta_sequence;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt17(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt17(-2.0), "-2.0000000000000000e0");
        for x in [0.1, 1.0 / 3.0, -7.25e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt17(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn system_file_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = random_beta_sequence(&mut rng, 3, 2);
        let file = SystemFile::from_beta(&b).unwrap();
        let text = to_json(&file).unwrap();
        let back: SystemFile = from_json(&text, "system").unwrap();
        assert_eq!(back, file);
        assert_eq!(to_json(&back).unwrap(), text);
        assert_eq!(back.to_beta().unwrap().rows(), b.rows());
    }

    #[test]
    fn taylor_and_potential_round_trip() {
        let a = WeylTaylorData::new(1, vec![CMat::from_element(1, 1, c(0.1, -1e-17)); 3]).unwrap();
        let file = TaylorFile::from_data(&a);
        let back: TaylorFile = from_json(&to_json(&file).unwrap(), "taylor").unwrap();
        assert_eq!(back.to_data().unwrap().coefficients(), a.coefficients());

        let pot = PotentialGrid::constant(
            Grid::new(0.7, 4).unwrap(),
            CMat::from_element(1, 1, c(1.0 / 3.0, 0.2)),
        )
        .unwrap();
        let pf = PotentialFile::from_grid(&pot);
        let back: PotentialFile = from_json(&to_json(&pf).unwrap(), "potential").unwrap();
        assert_eq!(back, pf);
        assert_eq!(back.to_grid().unwrap().values(), pot.values());
    }

    #[test]
    fn shape_errors_are_reported() {
        let bad = TaylorFile {
            p: 1,
            n: 1,
            alpha: vec![vec![vec![[0.0, 0.0]]]],
        };
        assert_eq!(bad.to_data().unwrap_err().kind, "length_mismatch");
        let bad = TaylorFile {
            p: 2,
            n: 0,
            alpha: vec![vec![vec![[0.0, 0.0]]]],
        };
        assert_eq!(bad.to_data().unwrap_err().kind, "shape_mismatch");
        assert_eq!(
            from_json::<TaylorFile>("{", "t").unwrap_err().code,
            crate::error::EXIT_INVALID
        );
    }

    #[test]
    fn csv_has_header() {
        let text = csv_table(&["x".into(), "y".into()], &[vec![0.5, -1.0]]);
        assert_eq!(text, "x,y\n5.0000000000000000e-1,-1.0000000000000000e0\n");
    }
}

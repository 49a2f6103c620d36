//! Deterministic data ingestion and emission: seeded synthetic signals,
//! PGM images, and CSV tables. Everything here is bit-exact so that a run
//! is reproducible from its config alone.

use crate::grid::{Grid, ScalarField};
use std::f64::consts::PI;
use thiserror::Error;

/// splitmix64 generator. Fully pinned recurrence so any reimplementation
/// produces identical streams:
/// `state += 0x9E3779B97F4A7C15; z = state;`
/// `z = (z ^ (z>>30)) * 0xBF58476D1CE4E5B9;`
/// `z = (z ^ (z>>27)) * 0x94D049BB133111EB;`
/// `output = z ^ (z>>31)`; uniform doubles are `output / 2^64`.
#[derive(Clone, Debug)]
pub struct Rng {
    state: u64,
    gauss_spare: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            state: seed,
            gauss_spare: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform double `output / 2^64` in [0, 1].
    pub fn uniform(&mut self) -> f64 {
        self.next_u64() as f64 / 18446744073709551616.0
    }

    /// Standard normal via Box-Muller over consecutive uniforms; both
    /// values of each pair are consumed.
    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.gauss_spare.take() {
            return z;
        }
        let mut u1 = self.uniform();
        while u1 == 0.0 {
            u1 = self.uniform();
        }
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let th = 2.0 * PI * u2;
        self.gauss_spare = Some(r * th.sin());
        r * th.cos()
    }
}

/// Synthetic 1D signal kinds on `x in [0, 1]` with `n` nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignalKind {
    /// `a * sin(2*pi*x)`
    Sine,
    /// `a * (indicator(x > 1/2) - 1/2)`
    Step,
    /// 4-tooth triangle wave of amplitude `a`
    Sawtooth,
}

impl std::str::FromStr for SignalKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sine" => Ok(SignalKind::Sine),
            "step" => Ok(SignalKind::Step),
            "sawtooth" => Ok(SignalKind::Sawtooth),
            other => Err(format!("unknown signal kind '{other}'")),
        }
    }
}

/// Seeded signal generator; Gaussian noise of standard deviation
/// `noise_sigma` is added pointwise when nonzero.
pub fn gen_signal(
    kind: SignalKind,
    n: usize,
    amplitude: f64,
    noise_sigma: f64,
    seed: u64,
) -> ScalarField {
    assert!(n >= 2, "signal needs at least 2 nodes");
    let h = 1.0 / (n - 1) as f64;
    let grid = Grid::line(n, h);
    let mut rng = Rng::new(seed);
    let values: Vec<f64> = (0..n)
        .map(|i| {
            let x = i as f64 * h;
            let base = match kind {
                SignalKind::Sine => amplitude * (2.0 * PI * x).sin(),
                SignalKind::Step => amplitude * (if x > 0.5 { 1.0 } else { 0.0 } - 0.5),
                SignalKind::Sawtooth => {
                    let s = (4.0 * x).fract();
                    amplitude * (1.0 - 4.0 * (s - 0.5).abs())
                }
            };
            if noise_sigma > 0.0 {
                base + noise_sigma * rng.gaussian()
            } else {
                base
            }
        })
        .collect();
    ScalarField::from_values(grid, values)
}

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),
    #[error("unsupported maxval {0} (only maxval <= 255)")]
    MaxvalTooLarge(u32),
    #[error("truncated PGM payload: expected {expected} samples, got {got}")]
    TruncatedPayload { expected: usize, got: usize },
    #[error("bad ASCII sample: {0}")]
    BadSample(String),
}

/// Read a P2 (ASCII) or P5 (binary, 8-bit) PGM image. Gray levels map
/// linearly onto [0, 1]; the grid uses pixel spacing `h = 1`.
pub fn read_pgm(bytes: &[u8]) -> Result<(ScalarField, Grid), PgmError> {
    let mut toks = HeaderTokens::new(bytes);
    let magic = toks.token()?;
    let binary = match magic.as_str() {
        "P2" => false,
        "P5" => true,
        other => {
            return Err(PgmError::MalformedHeader(format!(
                "bad magic '{other}'"
            )))
        }
    };
    let width: usize = parse_header_num(&toks.token()?)?;
    let height: usize = parse_header_num(&toks.token()?)?;
    let maxval: u32 = parse_header_num(&toks.token()?)? as u32;
    if width < 2 || height < 2 {
        return Err(PgmError::MalformedHeader(format!(
            "image too small: {width}x{height}"
        )));
    }
    if maxval == 0 {
        return Err(PgmError::MalformedHeader("maxval 0".into()));
    }
    if maxval > 255 {
        return Err(PgmError::MaxvalTooLarge(maxval));
    }
    let expected = width * height;
    let mut values = Vec::with_capacity(expected);
    if binary {
        // single whitespace byte after maxval, then raw samples
        let start = toks.pos + 1;
        if start >= bytes.len() {
            return Err(PgmError::TruncatedPayload { expected, got: 0 });
        }
        let payload = &bytes[start..];
        if payload.len() < expected {
            return Err(PgmError::TruncatedPayload {
                expected,
                got: payload.len(),
            });
        }
        values.extend(
            payload[..expected]
                .iter()
                .map(|b| *b as f64 / maxval as f64),
        );
    } else {
        for _ in 0..expected {
            match toks.token() {
                Ok(t) => {
                    let v: u32 = t
                        .parse()
                        .map_err(|_| PgmError::BadSample(t.clone()))?;
                    if v > maxval {
                        return Err(PgmError::BadSample(format!(
                            "sample {v} exceeds maxval {maxval}"
                        )));
                    }
                    values.push(v as f64 / maxval as f64);
                }
                Err(_) => {
                    return Err(PgmError::TruncatedPayload {
                        expected,
                        got: values.len(),
                    })
                }
            }
        }
    }
    let grid = Grid::rect(width, height, 1.0);
    Ok((ScalarField::from_values(grid, values), grid))
}

/// Write a binary (P5) 8-bit PGM; values are clamped to [0, 1] and mapped
/// with round-half-up onto 0..=255.
pub fn write_pgm(field: &ScalarField, grid: Grid) -> Vec<u8> {
    assert_eq!(field.grid(), grid, "field grid mismatch");
    assert_eq!(grid.dim(), 2, "PGM output needs a 2D grid");
    let [nx, ny] = grid.shape();
    let mut out = format!("P5\n{nx} {ny}\n255\n").into_bytes();
    out.extend(field.values().iter().map(|v| {
        let clamped = v.clamp(0.0, 1.0);
        (clamped * 255.0 + 0.5).floor() as u8
    }));
    out
}

struct HeaderTokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderTokens<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        HeaderTokens { bytes, pos: 0 }
    }

    /// Next whitespace-separated token, skipping `#` comments.
    fn token(&mut self) -> Result<String, PgmError> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        if self.pos >= self.bytes.len() {
            return Err(PgmError::MalformedHeader("unexpected end of data".into()));
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        String::from_utf8(self.bytes[start..self.pos].to_vec())
            .map_err(|_| PgmError::MalformedHeader("non-UTF8 token".into()))
    }
}

fn parse_header_num(tok: &str) -> Result<usize, PgmError> {
    tok.parse()
        .map_err(|_| PgmError::MalformedHeader(format!("expected a number, got '{tok}'")))
}

/// CSV writer: header row then data rows, LF newlines, comma separator,
/// numbers in shortest round-trip decimal.
pub fn write_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix64_reference_sequence() {
        // recomputed from the pinned recurrence
        let mut r = Rng::new(1);
        let expect: [u64; 4] = [
            0x910A2DEC89025CC1,
            0xBEEB8DA1658EEC67,
            0xF893A2EEFB32555E,
            0x71C18690EE42C90B,
        ];
        for e in expect {
            assert_eq!(r.next_u64(), e);
        }
    }

    #[test]
    fn rng_determinism() {
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn sine_exact_nodes() {
        let f = gen_signal(SignalKind::Sine, 5, 1.0, 0.0, 0);
        let expect = [0.0, 1.0, 0.0, -1.0, 0.0];
        for (v, e) in f.values().iter().zip(expect) {
            assert!((v - e).abs() < 1e-15, "{v} vs {e}");
        }
    }

    #[test]
    fn signals_deterministic_under_seed() {
        let a = gen_signal(SignalKind::Step, 33, 2.0, 0.1, 7);
        let b = gen_signal(SignalKind::Step, 33, 2.0, 0.1, 7);
        assert_eq!(a.values(), b.values());
        let c = gen_signal(SignalKind::Step, 33, 2.0, 0.1, 8);
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn sawtooth_has_four_teeth() {
        let f = gen_signal(SignalKind::Sawtooth, 65, 1.0, 0.0, 0);
        // ranges over [-1, 1] and peaks four times
        let max = f.values().iter().cloned().fold(f64::MIN, f64::max);
        let min = f.values().iter().cloned().fold(f64::MAX, f64::min);
        assert!((max - 1.0).abs() < 1e-12 && (min + 1.0).abs() < 1e-12);
        let peaks = f
            .values()
            .windows(3)
            .filter(|w| w[1] > w[0] && w[1] > w[2])
            .count();
        assert_eq!(peaks, 4);
    }

    #[test]
    fn pgm_ascii_endpoint_mapping() {
        let (f, g) = read_pgm(b"P2\n2 2\n255\n0 255 255 0\n").unwrap();
        assert_eq!(g.shape(), [2, 2]);
        assert_eq!(f.values(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn pgm_all_128() {
        let (f, _) = read_pgm(b"P2\n2 2\n255\n128 128 128 128\n").unwrap();
        for v in f.values() {
            assert!((v - 128.0 / 255.0).abs() < 1e-15);
            assert!((v - 0.50196).abs() < 1e-5);
        }
    }

    #[test]
    fn pgm_binary_roundtrip_identity() {
        let mut src = b"P5\n16 16\n255\n".to_vec();
        src.extend((0..256).map(|i| i as u8));
        let (f, g) = read_pgm(&src).unwrap();
        let out = write_pgm(&f, g);
        assert_eq!(out, src);
    }

    #[test]
    fn pgm_roundtrip_with_comments() {
        let mut src = b"P5\n# a comment\n4 2\n255\n".to_vec();
        src.extend([0u8, 10, 20, 30, 250, 251, 252, 253]);
        let (f, g) = read_pgm(&src).unwrap();
        let out = write_pgm(&f, g);
        let (f2, _) = read_pgm(&out).unwrap();
        assert_eq!(f.values(), f2.values());
    }

    #[test]
    fn pgm_distinct_errors() {
        assert!(matches!(
            read_pgm(b"P6\n2 2\n255\n0000"),
            Err(PgmError::MalformedHeader(_))
        ));
        assert!(matches!(
            read_pgm(b"P2\n2 2\n65535\n0 0 0 0"),
            Err(PgmError::MaxvalTooLarge(65535))
        ));
        assert!(matches!(
            read_pgm(b"P2\n2 2\n255\n0 0 0"),
            Err(PgmError::TruncatedPayload { expected: 4, got: 3 })
        ));
        let mut short = b"P5\n2 2\n255\n".to_vec();
        short.extend([1u8, 2]);
        assert!(matches!(
            read_pgm(&short),
            Err(PgmError::TruncatedPayload { .. })
        ));
    }

    #[test]
    fn csv_shapes() {
        assert_eq!(write_csv(&["a", "b"], &[]), "a,b\n");
        let one = write_csv(&["a", "b"], &[vec![1.0, 2.5]]);
        assert_eq!(one, "a,b\n1,2.5\n");
    }
}

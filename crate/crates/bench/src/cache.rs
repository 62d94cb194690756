//! On-disk reference solutions for problems without a closed form.
//!
//! Each reference is one UTF-8 text file named `{problem}_{scheme}_N{N}.ref`:
//!
//! ```text
//! # exprb-reference v1
//! problem adr-2d
//! scheme exprb42
//! N 8192
//! t_end 8e-2
//! dim 10201
//! doubling_change 4.8856058088020404e-12
//! values
//! 6.360377679466439e-1
//! ...
//! ```
//!
//! The header lines are `key value` pairs in any order, terminated by the
//! `values` line. Each value is written with Rust's shortest round-trip
//! exponent formatting, so parsing the file reproduces the stored `f64`
//! bit for bit. `doubling_change` is the max-norm difference, over the
//! problem's solution components, between the runs with `N` and `N/2` steps.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use exprb::integrators::SchemeId;
use exprb::problems::ProblemId;
use nalgebra::DVector;

use crate::BenchError;

pub const FORMAT_HEADER: &str = "# exprb-reference v1";
pub const CACHE_DIR_ENV: &str = "EXPRB_CACHE_DIR";
pub const DEFAULT_CACHE_DIR: &str = "reference-cache";

/// Scheme used for every cached reference.
pub const REFERENCE_SCHEME: SchemeId = SchemeId::Exprb42;

/// `--cache-dir` wins over the environment, which wins over the default.
pub fn resolve_cache_dir(flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(CACHE_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(DEFAULT_CACHE_DIR),
    }
}

/// Steps used by `build-reference` when none are given.
pub fn default_reference_steps(problem: ProblemId) -> usize {
    match problem {
        ProblemId::VanDerPol => 1 << 17,
        ProblemId::Adr2d => 8192,
        ProblemId::TwoBody | ProblemId::Parabolic1d => 1 << 14,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceFile {
    pub problem: ProblemId,
    pub scheme: SchemeId,
    pub steps: usize,
    pub t_end: f64,
    pub doubling_change: f64,
    pub values: DVector<f64>,
}

impl ReferenceFile {
    pub fn file_name(problem: ProblemId, scheme: SchemeId, steps: usize) -> String {
        format!("{problem}_{scheme}_N{steps}.ref")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(24 * self.values.len() + 160);
        s.push_str(FORMAT_HEADER);
        s.push('\n');
        s.push_str(&format!("problem {}\n", self.problem));
        s.push_str(&format!("scheme {}\n", self.scheme));
        s.push_str(&format!("N {}\n", self.steps));
        s.push_str(&format!("t_end {:e}\n", self.t_end));
        s.push_str(&format!("dim {}\n", self.values.len()));
        s.push_str(&format!("doubling_change {:e}\n", self.doubling_change));
        s.push_str("values\n");
        for v in self.values.iter() {
            s.push_str(&format!("{v:e}\n"));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        match lines.next() {
            Some(FORMAT_HEADER) => {}
            Some(other) => return Err(format!("unsupported header '{other}'")),
            None => return Err("empty file".into()),
        }
        let (mut problem, mut scheme, mut steps, mut t_end, mut dim, mut change) = (None, None, None, None, None, None);
        for line in lines.by_ref() {
            let line = line.trim();
            if line == "values" {
                break;
            }
            let (key, value) = line
                .split_once(' ')
                .ok_or_else(|| format!("malformed header line '{line}'"))?;
            let value = value.trim();
            match key {
                "problem" => problem = Some(ProblemId::from_str(value)?),
                "scheme" => scheme = Some(SchemeId::from_str(value)?),
                "N" => steps = Some(parse_num::<usize>(key, value)?),
                "t_end" => t_end = Some(parse_num::<f64>(key, value)?),
                "dim" => dim = Some(parse_num::<usize>(key, value)?),
                "doubling_change" => change = Some(parse_num::<f64>(key, value)?),
                _ => return Err(format!("unknown header key '{key}'")),
            }
        }
        let missing = |k: &str| format!("missing header key '{k}'");
        let dim = dim.ok_or_else(|| missing("dim"))?;
        let values = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| parse_num::<f64>("value", l.trim()))
            .collect::<Result<Vec<_>, _>>()?;
        if values.len() != dim {
            return Err(format!("expected {dim} values, found {}", values.len()));
        }
        Ok(Self {
            problem: problem.ok_or_else(|| missing("problem"))?,
            scheme: scheme.ok_or_else(|| missing("scheme"))?,
            steps: steps.ok_or_else(|| missing("N"))?,
            t_end: t_end.ok_or_else(|| missing("t_end"))?,
            doubling_change: change.ok_or_else(|| missing("doubling_change"))?,
            values: DVector::from_vec(values),
        })
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("bad value '{value}' for '{key}'"))
}

#[derive(Debug, Clone)]
pub struct ReferenceCache {
    dir: PathBuf,
}

impl ReferenceCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, problem: ProblemId, scheme: SchemeId, steps: usize) -> PathBuf {
        self.dir.join(ReferenceFile::file_name(problem, scheme, steps))
    }

    /// Writes through a temporary file so readers never see a partial reference.
    pub fn store(&self, reference: &ReferenceFile) -> Result<PathBuf, BenchError> {
        fs::create_dir_all(&self.dir)?;
        let path = self.path_for(reference.problem, reference.scheme, reference.steps);
        let tmp = path.with_extension("ref.tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(reference.to_text().as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(path)
    }

    pub fn load_file(path: &Path) -> Result<ReferenceFile, BenchError> {
        let text = fs::read_to_string(path)?;
        ReferenceFile::parse(&text).map_err(|reason| BenchError::CorruptReference {
            path: path.to_path_buf(),
            reason,
        })
    }

    /// Every cached step count for `problem`, ascending.
    pub fn available(&self, problem: ProblemId, scheme: SchemeId) -> Vec<usize> {
        let prefix = format!("{problem}_{scheme}_N");
        let mut out: Vec<usize> = fs::read_dir(&self.dir)
            .into_iter()
            .flatten()
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                name.strip_prefix(&prefix)?.strip_suffix(".ref")?.parse().ok()
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// The finest cached reference for `problem`.
    pub fn load_finest(&self, problem: ProblemId) -> Result<(PathBuf, ReferenceFile), BenchError> {
        let Some(&steps) = self.available(problem, REFERENCE_SCHEME).last() else {
            return Err(BenchError::MissingReference {
                problem,
                dir: self.dir.clone(),
            });
        };
        let path = self.path_for(problem, REFERENCE_SCHEME, steps);
        let reference = Self::load_file(&path)?;
        if reference.problem != problem {
            return Err(BenchError::CorruptReference {
                path,
                reason: format!("file holds a reference for {}", reference.problem),
            });
        }
        Ok((path, reference))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ReferenceFile {
        ReferenceFile {
            problem: ProblemId::VanDerPol,
            scheme: SchemeId::Exprb42,
            steps: 1024,
            t_end: 2.0,
            doubling_change: 3.3e-13,
            values: DVector::from_vec(vec![1.0 / 3.0, -std::f64::consts::PI * 1e-300, 0.0, 5e-324]),
        }
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let r = sample();
        let back = ReferenceFile::parse(&r.to_text()).unwrap();
        assert_eq!(back, r);
        for (a, b) in back.values.iter().zip(r.values.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn header_is_version_stamped() {
        let text = sample().to_text();
        assert!(text.starts_with("# exprb-reference v1\n"));
        let bumped = text.replace("v1", "v2");
        assert!(ReferenceFile::parse(&bumped)
            .unwrap_err()
            .contains("unsupported header"));
    }

    #[test]
    fn truncated_values_are_rejected() {
        let text = sample().to_text();
        let cut: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(ReferenceFile::parse(&cut).unwrap_err().contains("expected 4 values"));
    }

    #[test]
    fn flag_beats_default() {
        let p = resolve_cache_dir(Some(Path::new("/tmp/x")));
        assert_eq!(p, PathBuf::from("/tmp/x"));
    }
}

//! Work comparison between two schemes at matched accuracy.

use exprb::integrators::SchemeId;

use crate::experiment::ConvergenceRow;

#[derive(Debug, Clone, PartialEq)]
pub struct WorkPair {
    pub n: usize,
    pub error: f64,
    pub wall_seconds: f64,
    /// Row of the other scheme whose error is nearest on a log scale.
    pub other_n: usize,
    pub other_error: f64,
    pub other_wall_seconds: f64,
}

impl WorkPair {
    pub fn faster(&self) -> bool {
        self.wall_seconds < self.other_wall_seconds
    }
}

/// Pairs every completed row of `scheme` with the completed row of `other`
/// whose error is nearest in `|log err|`.
pub fn matched_pairs(rows: &[ConvergenceRow], scheme: SchemeId, other: SchemeId) -> Vec<WorkPair> {
    let done = |s: SchemeId| {
        rows.iter()
            .filter(move |r| r.scheme == s)
            .filter_map(|r| r.error.filter(|e| *e > 0.0).map(|e| (r, e)))
    };
    done(scheme)
        .filter_map(|(r, e)| {
            let (o, oe) = done(other).min_by(|a, b| {
                let da = (a.1.ln() - e.ln()).abs();
                let db = (b.1.ln() - e.ln()).abs();
                da.total_cmp(&db)
            })?;
            Some(WorkPair {
                n: r.n,
                error: e,
                wall_seconds: r.wall_seconds,
                other_n: o.n,
                other_error: oe,
                other_wall_seconds: o.wall_seconds,
            })
        })
        .collect()
}

//! Trajectory records, error metrics, and convergence-rate computation.
//!
//! The transport benchmark compares runs through the particle centroid's
//! vertical coordinate over time: the error of a run against a reference is
//! the maximum over the run's sample times of |y(t) − y_ref(t)| with the
//! reference interpolated linearly in time, plus a single-time variant at a
//! probe instant. Rates between consecutive refinement levels use the
//! standard log-ratio formula.

use crate::vec2::Vec2;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConvergenceError {
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("errors and step sizes must be positive (got {value} at index {index})")]
    NonPositive { index: usize, value: f64 },
    #[error("step sizes must be strictly decreasing (index {index})")]
    NotDecreasing { index: usize },
    #[error("need at least two levels, got {0}")]
    TooFewLevels(usize),
}

/// Time series of a particle centroid: one sample per accepted step, strictly
/// increasing in time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryRecord {
    times: Vec<f64>,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl TrajectoryRecord {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a sample. Panics if `t` does not increase strictly — records
    /// are produced by the time loop, so a violation is a programming error.
    pub fn push(&mut self, t: f64, centroid: Vec2) {
        assert!(
            self.times.last().is_none_or(|&last| t > last),
            "trajectory times must increase strictly: {t} after {:?}",
            self.times.last()
        );
        self.times.push(t);
        self.xs.push(centroid.x);
        self.ys.push(centroid.y);
    }

    /// Builds a record from parallel columns, validating monotonicity.
    pub fn from_columns(
        times: Vec<f64>,
        xs: Vec<f64>,
        ys: Vec<f64>,
    ) -> Result<Self, ConvergenceError> {
        assert_eq!(times.len(), xs.len());
        assert_eq!(times.len(), ys.len());
        for i in 1..times.len() {
            if times[i] <= times[i - 1] {
                return Err(ConvergenceError::NotDecreasing { index: i });
            }
        }
        Ok(TrajectoryRecord { times, xs, ys })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn sample(&self, i: usize) -> (f64, Vec2) {
        (self.times[i], Vec2::new(self.xs[i], self.ys[i]))
    }

    pub fn last(&self) -> Option<(f64, Vec2)> {
        if self.is_empty() { None } else { Some(self.sample(self.len() - 1)) }
    }

    /// Vertical coordinate at time `t`, linearly interpolated; clamped to the
    /// end values outside the recorded span.
    pub fn y_at(&self, t: f64) -> Result<f64, ConvergenceError> {
        interp(&self.times, &self.ys, t)
    }

    /// Horizontal coordinate at time `t` (same interpolation rules).
    pub fn x_at(&self, t: f64) -> Result<f64, ConvergenceError> {
        interp(&self.times, &self.xs, t)
    }
}

fn interp(ts: &[f64], vs: &[f64], t: f64) -> Result<f64, ConvergenceError> {
    if ts.is_empty() {
        return Err(ConvergenceError::EmptyTrajectory);
    }
    if t <= ts[0] {
        return Ok(vs[0]);
    }
    if t >= ts[ts.len() - 1] {
        return Ok(vs[vs.len() - 1]);
    }
    let hi = ts.partition_point(|&s| s < t);
    let (t0, t1) = (ts[hi - 1], ts[hi]);
    let a = (t - t0) / (t1 - t0);
    Ok(vs[hi - 1] + a * (vs[hi] - vs[hi - 1]))
}

/// Maximum over the run's sample times of the vertical-coordinate mismatch
/// against the (time-interpolated) reference. Only times inside the
/// reference's recorded span are compared.
pub fn trajectory_error(
    traj: &TrajectoryRecord,
    reference: &TrajectoryRecord,
) -> Result<f64, ConvergenceError> {
    if traj.is_empty() || reference.is_empty() {
        return Err(ConvergenceError::EmptyTrajectory);
    }
    let span_end = reference.times[reference.len() - 1];
    let mut err = 0.0f64;
    for i in 0..traj.len() {
        let t = traj.times[i];
        if t > span_end {
            break;
        }
        err = err.max((traj.ys[i] - reference.y_at(t)?).abs());
    }
    Ok(err)
}

/// Vertical-coordinate mismatch at one probe time (both records interpolated).
pub fn trajectory_error_at(
    traj: &TrajectoryRecord,
    reference: &TrajectoryRecord,
    t_star: f64,
) -> Result<f64, ConvergenceError> {
    Ok((traj.y_at(t_star)? - reference.y_at(t_star)?).abs())
}

/// Rates between consecutive refinement levels:
/// `r_k = ln(E_k / E_{k+1}) / ln(s_k / s_{k+1})` for strictly decreasing
/// step sizes `s` and positive errors `E`.
pub fn convergence_rate(errors: &[f64], steps: &[f64]) -> Result<Vec<f64>, ConvergenceError> {
    if errors.len() != steps.len() || errors.len() < 2 {
        return Err(ConvergenceError::TooFewLevels(errors.len().min(steps.len())));
    }
    for (i, &e) in errors.iter().enumerate() {
        if !(e > 0.0) || !e.is_finite() {
            return Err(ConvergenceError::NonPositive { index: i, value: e });
        }
    }
    for (i, &s) in steps.iter().enumerate() {
        if !(s > 0.0) || !s.is_finite() {
            return Err(ConvergenceError::NonPositive { index: i, value: s });
        }
        if i > 0 && s >= steps[i - 1] {
            return Err(ConvergenceError::NotDecreasing { index: i });
        }
    }
    Ok((0..errors.len() - 1)
        .map(|k| (errors[k] / errors[k + 1]).ln() / (steps[k] / steps[k + 1]).ln())
        .collect())
}

/// One line of a study table.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    /// Refinement level (a dt or an h).
    pub level: f64,
    /// Error against the study's reference run.
    pub error: f64,
    /// Rate from the previous row (absent on the coarsest row).
    pub rate: Option<f64>,
}

/// Machine-readable study result: what was varied, the tabulated rows, and
/// the reference level the errors were measured against.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub axis: String,
    pub reference_level: f64,
    pub rows: Vec<StudyRow>,
}

impl StudyReport {
    pub fn from_errors(
        axis: &str,
        levels: &[f64],
        errors: &[f64],
        reference_level: f64,
    ) -> Result<Self, ConvergenceError> {
        let rates = convergence_rate(errors, levels)?;
        let rows = levels
            .iter()
            .zip(errors)
            .enumerate()
            .map(|(i, (&level, &error))| StudyRow {
                level,
                error,
                rate: if i == 0 { None } else { Some(rates[i - 1]) },
            })
            .collect();
        Ok(StudyReport { axis: axis.to_string(), reference_level, rows })
    }

    pub fn rates(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.rate).collect()
    }

    pub fn mean_rate(&self) -> f64 {
        let r = self.rates();
        r.iter().sum::<f64>() / r.len().max(1) as f64
    }

    /// Tab-separated table: a `#`-prefixed header, then one row per level
    /// with full-precision numbers.
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "# axis {}\n# reference_level {:?}\n# {}\terror\trate\n",
            self.axis, self.reference_level, self.axis
        );
        for row in &self.rows {
            match row.rate {
                Some(r) => s.push_str(&format!("{:?}\t{:?}\t{:?}\n", row.level, row.error, r)),
                None => s.push_str(&format!("{:?}\t{:?}\t-\n", row.level, row.error)),
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xorshift(state: &mut u64) -> f64 {
        *state ^= *state << 13;
        *state ^= *state >> 7;
        *state ^= *state << 17;
        (*state >> 11) as f64 / (1u64 << 53) as f64
    }

    #[test]
    fn interp_is_exact_on_linear_data() {
        let mut tr = TrajectoryRecord::new();
        for i in 0..11 {
            let t = i as f64 * 0.1;
            tr.push(t, Vec2::new(2.0 * t + 1.0, -3.0 * t + 0.5));
        }
        assert!((tr.y_at(0.137).unwrap() - (-3.0 * 0.137 + 0.5)).abs() < 1e-14);
        assert!((tr.x_at(0.777).unwrap() - (2.0 * 0.777 + 1.0)).abs() < 1e-14);
        // clamped outside the span
        assert_eq!(tr.y_at(-1.0).unwrap(), 0.5);
        assert_eq!(tr.y_at(9.0).unwrap(), tr.ys()[10]);
    }

    #[test]
    fn error_of_identical_and_shifted_trajectories() {
        let mut a = TrajectoryRecord::new();
        let mut b = TrajectoryRecord::new();
        let mut c = TrajectoryRecord::new();
        for i in 0..50 {
            let t = i as f64 * 0.02;
            let y = (3.0 * t).sin() * 0.2;
            a.push(t, Vec2::new(t, y));
            b.push(t, Vec2::new(t, y));
            c.push(t, Vec2::new(t, y + 2.5e-3));
        }
        assert_eq!(trajectory_error(&a, &b).unwrap(), 0.0);
        let shifted = trajectory_error(&c, &a).unwrap();
        assert!((shifted - 2.5e-3).abs() < 1e-15);
        assert!(
            (trajectory_error_at(&c, &a, 0.5).unwrap() - 2.5e-3).abs() < 1e-15
        );
        assert_eq!(
            trajectory_error(&TrajectoryRecord::new(), &a),
            Err(ConvergenceError::EmptyTrajectory)
        );
    }

    #[test]
    fn error_ignores_times_past_the_reference_span() {
        let mut long = TrajectoryRecord::new();
        let mut short = TrajectoryRecord::new();
        for i in 0..100 {
            let t = i as f64 * 0.01;
            long.push(t, Vec2::new(t, t));
            if t <= 0.5 {
                short.push(t, Vec2::new(t, t));
            }
        }
        // past 0.5 the long record diverges but must not be compared
        assert_eq!(trajectory_error(&long, &short).unwrap(), 0.0);
    }

    #[test]
    fn rates_of_exact_sequences() {
        let steps = [0.4, 0.2, 0.1];
        let first = convergence_rate(&[0.4, 0.2, 0.1], &steps).unwrap();
        for r in first {
            assert!((r - 1.0).abs() < 1e-14);
        }
        let second = convergence_rate(&[1.6e-1, 4e-2, 1e-2], &steps).unwrap();
        for r in second {
            assert!((r - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rates_of_a_measured_error_sequence() {
        // second-order-looking data on successive halvings
        let errors = [4.5e-2, 1.1e-2, 2.8e-3, 6.1e-4];
        let steps = [3.0 / 200.0, 3.0 / 400.0, 3.0 / 800.0, 3.0 / 1600.0];
        let rates = convergence_rate(&errors, &steps).unwrap();
        let expect = [
            (4.5f64 / 1.1).ln() / 2f64.ln(),
            (1.1f64 / 0.28).ln() / 2f64.ln(),
            (2.8f64 / 0.61).ln() / 2f64.ln(),
        ];
        for (r, e) in rates.iter().zip(expect) {
            assert!((r - e).abs() < 1e-12);
        }
        assert!((rates[0] - 2.0326).abs() < 5e-4);
        assert!((rates[1] - 1.9740).abs() < 5e-4);
        assert!((rates[2] - 2.1985).abs() < 5e-4);
    }

    #[test]
    fn rate_is_scale_invariant() {
        let mut state = 0x9e3779b97f4a7c15u64;
        for _ in 0..50 {
            let n = 3 + (xorshift(&mut state) * 4.0) as usize;
            let mut steps = Vec::new();
            let mut errors = Vec::new();
            let mut s = 1.0;
            let mut e = 1.0;
            for _ in 0..n {
                s *= 0.3 + 0.5 * xorshift(&mut state);
                e *= 0.05 + 0.6 * xorshift(&mut state);
                steps.push(s);
                errors.push(e);
            }
            let base = convergence_rate(&errors, &steps).unwrap();
            let c = 10f64.powf(xorshift(&mut state) * 6.0 - 3.0);
            let scaled_errors: Vec<f64> = errors.iter().map(|x| x * c).collect();
            let scaled = convergence_rate(&scaled_errors, &steps).unwrap();
            for (a, b) in base.iter().zip(&scaled) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn rate_rejects_bad_input() {
        assert!(matches!(
            convergence_rate(&[1.0, -0.5], &[0.2, 0.1]),
            Err(ConvergenceError::NonPositive { index: 1, .. })
        ));
        assert!(matches!(
            convergence_rate(&[1.0, 0.5], &[0.1, 0.2]),
            Err(ConvergenceError::NotDecreasing { index: 1 })
        ));
        assert!(matches!(
            convergence_rate(&[1.0], &[0.1]),
            Err(ConvergenceError::TooFewLevels(1))
        ));
    }

    #[test]
    fn study_report_table_is_parseable() {
        let report = StudyReport::from_errors(
            "dt",
            &[0.015, 0.0075, 0.00375],
            &[4e-2, 1e-2, 2.5e-3],
            0.001875,
        )
        .unwrap();
        assert_eq!(report.rows.len(), 3);
        assert_eq!(report.rows[0].rate, None);
        assert!((report.mean_rate() - 2.0).abs() < 1e-12);
        let table = report.to_table();
        let data_lines: Vec<&str> =
            table.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data_lines.len(), 3);
        let fields: Vec<&str> = data_lines[1].split('\t').collect();
        assert_eq!(fields[0].parse::<f64>().unwrap(), 0.0075);
        assert_eq!(fields[1].parse::<f64>().unwrap(), 1e-2);
        assert!((fields[2].parse::<f64>().unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn push_rejects_non_increasing_time() {
        let mut tr = TrajectoryRecord::new();
        tr.push(0.0, Vec2::ZERO);
        let r = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
            tr.push(0.0, Vec2::ZERO);
        }));
        assert!(r.is_err());
        assert!(TrajectoryRecord::from_columns(
            vec![0.0, 0.1, 0.1],
            vec![0.0; 3],
            vec![0.0; 3]
        )
        .is_err());
    }
}

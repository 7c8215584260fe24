use crate::BenchError;

/// log2 of the normalization constant: fitted against the published
/// leaderboard, the mean implied exponent lands within 0.01 of 40.
pub const DEFAULT_LOG2_C: f64 = 40.0;

/// Final challenge score: 2^(2·psnr) / (C · runtime), computed as
/// 2^(2·psnr − log2C) / runtime to stay in range.
pub fn challenge_score(psnr_db: f64, runtime_ms: f64, log2_c: f64) -> Result<f64, BenchError> {
    if !(runtime_ms > 0.0) {
        return Err(BenchError::BadArgument(format!(
            "runtime must be > 0 ms, got {runtime_ms}"
        )));
    }
    Ok((2.0 * psnr_db - log2_c).exp2() / runtime_ms)
}

/// Least-squares fit of log2 C from (psnr, runtime, published score) rows.
#[derive(Clone, Copy, Debug)]
pub struct FitC {
    pub log2_c: f64,
    pub residual_rms: f64,
    pub residual_max: f64,
    pub rows: usize,
}

/// In the log domain the model is linear:
/// log2 C = 2·psnr − log2(runtime·score), so the least-squares estimate is
/// the mean of the per-row implied exponents. Residuals report the spread.
pub fn fit_c(records: &[(f64, f64, f64)]) -> Result<FitC, BenchError> {
    if records.is_empty() {
        return Err(BenchError::BadArgument(
            "fit_c needs at least one scored record".into(),
        ));
    }
    for &(psnr, runtime, score) in records {
        if !(runtime > 0.0) || !(score > 0.0) {
            return Err(BenchError::BadArgument(format!(
                "record (psnr {psnr}, runtime {runtime}, score {score}) must have positive runtime and score"
            )));
        }
    }
    let implied: Vec<f64> = records
        .iter()
        .map(|&(psnr, runtime, score)| 2.0 * psnr - (runtime * score).log2())
        .collect();
    let mean = implied.iter().sum::<f64>() / implied.len() as f64;
    let mut rms = 0.0;
    let mut max = 0.0f64;
    for v in &implied {
        let r = v - mean;
        rms += r * r;
        max = max.max(r.abs());
    }
    Ok(FitC {
        log2_c: mean,
        residual_rms: (rms / implied.len() as f64).sqrt(),
        residual_max: max,
        rows: records.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::mai2022_track1;

    #[test]
    fn published_reference_rows_within_two_percent() {
        // spot-check three published rows at C = 2^40
        for (psnr, runtime, expect) in [(23.33, 6.8, 14.87), (23.96, 11.4, 21.24), (23.87, 23.1, 9.25)] {
            let got = challenge_score(psnr, runtime, DEFAULT_LOG2_C).unwrap();
            assert!(
                (got - expect).abs() / expect <= 0.02,
                "psnr {psnr}: got {got}, published {expect}"
            );
        }
    }

    #[test]
    fn doubling_runtime_halves_score_exactly() {
        let a = challenge_score(23.5, 10.0, DEFAULT_LOG2_C).unwrap();
        let b = challenge_score(23.5, 20.0, DEFAULT_LOG2_C).unwrap();
        assert_eq!(a / 2.0, b);
    }

    #[test]
    fn half_db_doubles_score_exactly() {
        let a = challenge_score(23.0, 10.0, DEFAULT_LOG2_C).unwrap();
        let b = challenge_score(23.5, 10.0, DEFAULT_LOG2_C).unwrap();
        assert_eq!(2.0 * a, b);
    }

    #[test]
    fn strictly_monotone() {
        let base = challenge_score(23.0, 10.0, DEFAULT_LOG2_C).unwrap();
        assert!(challenge_score(23.01, 10.0, DEFAULT_LOG2_C).unwrap() > base);
        assert!(challenge_score(23.0, 10.1, DEFAULT_LOG2_C).unwrap() < base);
        assert!(challenge_score(23.0, 0.0, DEFAULT_LOG2_C).is_err());
    }

    #[test]
    fn planted_constant_is_recovered_exactly() {
        // a single synthetic record with C = 1024
        let score = (2.0f64 * 20.0 - 10.0).exp2() / 5.0;
        let fit = fit_c(&[(20.0, 5.0, score)]).unwrap();
        assert!((fit.log2_c - 10.0).abs() < 1e-12);
        assert_eq!(fit.residual_max, 0.0);
    }

    #[test]
    fn inconsistent_records_report_residual() {
        let fit = fit_c(&[(20.0, 5.0, 1.0), (20.0, 5.0, 2.0)]).unwrap();
        assert!(fit.residual_max > 0.0);
        assert!(fit.residual_rms > 0.0);
    }

    #[test]
    fn published_table_fit_recovers_forty() {
        let rows: Vec<(f64, f64, f64)> = mai2022_track1()
            .iter()
            .filter_map(|r| r.score.map(|s| (r.psnr, r.gpu_runtime_ms, s)))
            .collect();
        assert_eq!(rows.len(), 15);
        let fit = fit_c(&rows).unwrap();
        assert!(
            (fit.log2_c - 40.0).abs() <= 0.05,
            "fitted log2 C = {}",
            fit.log2_c
        );
    }

    #[test]
    fn empty_input_rejected() {
        assert!(fit_c(&[]).is_err());
    }
}

//! Published Mobile AI 2022 learned-ISP challenge results (track 1): team,
//! fidelity on the hidden test set, Full HD runtimes on the Snapdragon
//! 8 Gen 1, and the published final score. Scores are as printed (two
//! decimals); the two entries whose on-device run failed carry no score.

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RowKind {
    Ranked,
    /// Scored out of ranking (weights were corrupted during the original
    /// submission and fixed afterwards).
    OutOfRanking,
    Baseline,
    /// Runtime measurement failed; no score.
    Unscored,
}

#[derive(Clone, Copy, Debug)]
pub struct PublishedRow {
    pub team: &'static str,
    pub psnr: f64,
    pub ssim: f64,
    pub cpu_runtime_ms: f64,
    pub gpu_runtime_ms: f64,
    pub score: Option<f64>,
    pub kind: RowKind,
}

const fn row(
    team: &'static str,
    psnr: f64,
    ssim: f64,
    cpu: f64,
    gpu: f64,
    score: Option<f64>,
    kind: RowKind,
) -> PublishedRow {
    PublishedRow {
        team,
        psnr,
        ssim,
        cpu_runtime_ms: cpu,
        gpu_runtime_ms: gpu,
        score,
        kind,
    }
}

/// All 17 track-1 rows in published order: 11 ranked, the out-of-ranking
/// entry, 2 unscored entries, 3 baselines.
pub fn mai2022_track1() -> &'static [PublishedRow] {
    use RowKind::*;
    const ROWS: &[PublishedRow] = &[
        row("MiAlgo", 23.33, 0.8516, 135.0, 6.8, Some(14.87), Ranked),
        row("ENERZAi", 23.8, 0.8652, 208.0, 18.9, Some(10.27), Ranked),
        row("HITZST01", 23.89, 0.8666, 712.0, 34.3, Some(6.41), Ranked),
        row("MINCHO", 23.65, 0.8658, 886.0, 41.5, Some(3.8), Ranked),
        row("ENERZAi-L", 24.08, 0.8778, 45956.0, 212.0, Some(1.35), Ranked),
        row("HITZST01-L", 24.09, 0.8667, 4694.0, 482.0, Some(0.6), Ranked),
        row("JMU-CVLab", 23.22, 0.8281, 3487.0, 182.0, Some(0.48), Ranked),
        row("rainbow", 21.66, 0.8399, 277.0, 28.0, Some(0.36), Ranked),
        row("CASIA 1st", 24.09, 0.884, 14792.0, 1044.0, Some(0.28), Ranked),
        row("MiAlgo-L", 23.65, 0.8673, 15448.0, 1164.0, Some(0.14), Ranked),
        row("DANN-ISP", 23.1, 0.8648, 97333.0, 583.0, Some(0.13), Ranked),
        row("Multimedia", 23.96, 0.8543, 293.0, 11.4, Some(21.24), OutOfRanking),
        row("SKD-VSP", 24.08, 0.8778, 600000.0, f64::NAN, None, Unscored),
        row("CHannel Team", 22.28, 0.8482, 600000.0, f64::NAN, None, Unscored),
        row("MicroISP 1.0", 23.87, 0.853, 973.0, 23.1, Some(9.25), Baseline),
        row("MicroISP 0.5", 23.6, 0.846, 503.0, 15.6, Some(9.43), Baseline),
        row("PyNET-V2 Mobile", 24.72, 0.8783, 8342.0, 194.0, Some(3.58), Baseline),
    ];
    ROWS
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scored_row_count() {
        let table = mai2022_track1();
        assert_eq!(table.len(), 17);
        assert_eq!(table.iter().filter(|r| r.score.is_some()).count(), 15);
        assert_eq!(
            table.iter().filter(|r| r.kind == RowKind::Ranked).count(),
            11
        );
    }
}

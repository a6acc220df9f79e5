use ctd::circuits::{DepthState, Direction, Window};
use ctd::correlation::{
    bin_spikes, classify_by_correlation, normalized_profile, signed_xcorr, xcorr, xcorr_counts, BinnedTrain,
    CorrelationError, CorrelationParams,
};
use ctd::spiking::{ConnectionKind, SpikeTrain};
use proptest::prelude::*;

fn binned(counts: &[u32]) -> BinnedTrain {
    BinnedTrain::new(counts.to_vec(), 1.0)
}

/// Every (i, j) bin pair with j − i = w.
fn pairwise(x: &[u32], y: &[u32], w: i64) -> i64 {
    let mut total = 0;
    for (i, &a) in x.iter().enumerate() {
        for (j, &b) in y.iter().enumerate() {
            if j as i64 - i as i64 == w {
                total += i64::from(a) * i64::from(b);
            }
        }
    }
    total
}

#[test]
fn binning_examples() {
    let spaced = bin_spikes(&SpikeTrain::new(vec![5.0, 15.0, 25.0]), 10.0, 30.0).unwrap();
    assert_eq!(spaced.counts, vec![1, 1, 1]);
    assert_eq!(bin_spikes(&SpikeTrain::new(vec![]), 10.0, 30.0).unwrap().counts, vec![0, 0, 0]);
    let b = bin_spikes(&SpikeTrain::new(vec![0.0, 1.5, 9.9, 10.0, 29.0]), 10.0, 30.0).unwrap();
    assert_eq!(b.counts, vec![3, 1, 1]);
    assert_eq!(b.sign, 1);
    let edge = bin_spikes(&SpikeTrain::new(vec![30.0]), 10.0, 30.0).unwrap();
    assert_eq!(edge.counts, vec![0, 0, 1]);
    assert_eq!(bin_spikes(&SpikeTrain::new(vec![]), 10.0, 0.0).unwrap().counts, vec![0]);
    assert_eq!(
        bin_spikes(&SpikeTrain::new(vec![31.0]), 10.0, 30.0),
        Err(CorrelationError::HorizonTooShort { horizon: 30.0, latest: 31.0 })
    );
    assert_eq!(bin_spikes(&SpikeTrain::new(vec![]), 0.0, 10.0), Err(CorrelationError::BadBinWidth));
}

#[test]
fn xcorr_examples() {
    assert_eq!(xcorr(&binned(&[1, 0, 1]), &binned(&[1, 0, 1]), 0).unwrap(), 2);
    assert_eq!(xcorr(&binned(&[0, 1, 0]), &binned(&[0, 0, 1]), 1).unwrap(), 1);
    for w in -3..=3 {
        assert_eq!(xcorr(&binned(&[4, 1, 7]), &binned(&[0, 0, 0]), w).unwrap(), 0);
    }
    let x = binned(&[1, 0, 2]);
    let y = binned(&[0, 1, 1]);
    assert_eq!(xcorr(&x, &y, 0).unwrap(), 2);
    assert_eq!(xcorr(&x, &y, 1).unwrap(), 1);
    assert_eq!(xcorr(&x, &y, 2).unwrap(), 1);
    assert_eq!(xcorr(&x, &y, -1).unwrap(), 2);
    assert_eq!(xcorr(&x, &y, 3).unwrap(), 0);
    assert_eq!(xcorr(&x, &y, -7).unwrap(), 0);
    let coarse = BinnedTrain::new(vec![1], 2.0);
    assert_eq!(xcorr(&x, &coarse, 0), Err(CorrelationError::BinMismatch(1.0, 2.0)));
}

#[test]
fn signed_examples() {
    let x = binned(&[2, 1]);
    let y = binned(&[1, 3]);
    let inh = |b: &BinnedTrain| b.clone().with_kind(ConnectionKind::Inhibitory);
    assert_eq!(signed_xcorr(&x, &y, 0).unwrap(), 5);
    assert_eq!(signed_xcorr(&inh(&x), &y, 0).unwrap(), -5);
    assert_eq!(signed_xcorr(&x, &inh(&y), 1).unwrap(), -6);
    assert_eq!(signed_xcorr(&inh(&x), &inh(&y), 0).unwrap(), 5);
}

#[test]
fn normalized_examples() {
    let p = normalized_profile(&binned(&[2, 0, 2]), &binned(&[1, 0, 1]), -2..=2).unwrap();
    assert_eq!(p.lags, vec![-2, -1, 0, 1, 2]);
    assert!((p.values[2] - 1.0).abs() < 1e-12);
    assert!((p.values[0] - 0.5).abs() < 1e-12 && (p.values[4] - 0.5).abs() < 1e-12);
    assert_eq!(p.values[1], 0.0);
    assert!(!p.degenerate);
    let d = normalized_profile(&binned(&[0, 0, 0]), &binned(&[1, 2, 3]), -1..=1).unwrap();
    assert!(d.degenerate);
    assert_eq!(d.values, vec![0.0; 3]);
    assert_eq!(d.peak(), 0.0);
}

fn periodic(start: f64, period: f64, end: f64) -> SpikeTrain {
    SpikeTrain::new((0..).map(|i| start + i as f64 * period).take_while(|&t| t < end).collect())
}

#[test]
fn classifier_examples() {
    let p = CorrelationParams::default();
    let w = Window::new(0.0, 1000.0);
    let same = periodic(0.0, 20.0, 1000.0);
    assert_eq!(classify_by_correlation(&same, &same, Direction::LeftToRight, w, &p).unwrap(), DepthState::M);
    let silent = SpikeTrain::new(vec![]);
    assert_eq!(classify_by_correlation(&silent, &same, Direction::LeftToRight, w, &p).unwrap(), DepthState::M);

    let slow = periodic(3.0, 47.0, 1000.0);
    let fast = periodic(0.0, 13.0, 1000.0);
    assert_eq!(classify_by_correlation(&slow, &fast, Direction::LeftToRight, w, &p).unwrap(), DepthState::N);
    assert_eq!(classify_by_correlation(&slow, &fast, Direction::RightToLeft, w, &p).unwrap(), DepthState::F);
    assert_eq!(classify_by_correlation(&fast, &slow, Direction::LeftToRight, w, &p).unwrap(), DepthState::F);
    assert_eq!(classify_by_correlation(&slow, &fast, Direction::Undetermined, w, &p).unwrap(), DepthState::M);

    let left = periodic(1.0, 12.0, 1000.0);
    let right = periodic(5.0, 36.0, 1000.0);
    assert_eq!(classify_by_correlation(&left, &right, Direction::RightToLeft, w, &p).unwrap(), DepthState::N);
    assert_eq!(classify_by_correlation(&silent, &silent, Direction::RightToLeft, w, &p).unwrap(), DepthState::M);

    let outside = periodic(1000.0, 13.0, 2000.0);
    assert_eq!(classify_by_correlation(&slow, &outside, Direction::LeftToRight, w, &p).unwrap(), DepthState::M);
}

fn counts(max_len: usize) -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(0u32..6, 0..=max_len)
}

proptest! {
    #[test]
    fn xcorr_matches_pairwise_sum(x in counts(512), y in counts(512), w in -600i64..600) {
        prop_assert_eq!(xcorr_counts(&x, &y, w), pairwise(&x, &y, w));
    }

    #[test]
    fn xcorr_is_lag_symmetric(x in counts(64), y in counts(64), w in -80i64..80) {
        prop_assert_eq!(xcorr_counts(&x, &y, w), xcorr_counts(&y, &x, -w));
    }

    #[test]
    fn signs_multiply(x in counts(32), y in counts(32), w in -40i64..40, sx in any::<bool>(), sy in any::<bool>()) {
        let kind = |inh: bool| if inh { ConnectionKind::Inhibitory } else { ConnectionKind::Excitatory };
        let a = binned(&x).with_kind(kind(sx));
        let b = binned(&y).with_kind(kind(sy));
        let sign = if sx != sy { -1 } else { 1 };
        prop_assert_eq!(signed_xcorr(&a, &b, w).unwrap(), sign * xcorr_counts(&x, &y, w));
    }

    #[test]
    fn normalized_profile_is_scale_free_and_bounded(
        x in counts(64), y in counts(64), k in 1u32..5, m in 1u32..5,
    ) {
        let p = normalized_profile(&binned(&x), &binned(&y), -10..=10).unwrap();
        let xs: Vec<u32> = x.iter().map(|v| v * k).collect();
        let ys: Vec<u32> = y.iter().map(|v| v * m).collect();
        let q = normalized_profile(&binned(&xs), &binned(&ys), -10..=10).unwrap();
        prop_assert_eq!(p.degenerate, q.degenerate);
        for (a, b) in p.values.iter().zip(&q.values) {
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((-1.0..=1.0 + 1e-12).contains(a));
        }
    }

    #[test]
    fn binning_conserves_spikes(mut times in prop::collection::vec(0.0f64..500.0, 0..200), width in 0.5f64..50.0) {
        times.sort_by(f64::total_cmp);
        let n = times.len() as u64;
        let b = bin_spikes(&SpikeTrain::new(times), width, 500.0).unwrap();
        prop_assert_eq!(b.total(), n);
    }
}

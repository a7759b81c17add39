use std::sync::Arc;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use geosynth::data::{Column, Dataset, Schema, Variable};
use geosynth::dpmpm::{DpmpmConfig, DpmpmState, gibbs_sweep};

fn main() {
    let schema = Arc::new(
        Schema::categorical(
            (0..4).map(|k| Variable::categorical(format!("v{k}"), vec!["n".into(), "y".into()])).collect(),
            vec![], vec![],
        ).unwrap(),
    );
    let cfg = DpmpmConfig { truncation: 100, iterations: 400, burn_in: 200, thin: 2, ..DpmpmConfig::default() };
    let mut r = ChaCha20Rng::seed_from_u64(40_000);
    let n = 2_000usize;
    let mut cols: Vec<Vec<u32>> = vec![Vec::with_capacity(n); 4];
    for _ in 0..n {
        let class_two = r.random::<f64>() < 0.5;
        for col in cols.iter_mut() {
            let p_yes = if class_two { 0.9 } else { 0.1 };
            col.push(if r.random::<f64>() < p_yes { 2 } else { 1 });
        }
    }
    let ds = Dataset::new(Arc::clone(&schema), cols.into_iter().map(Column::Categorical).collect()).unwrap();
    let mut state = DpmpmState::init(&[2,2,2,2], n, &cfg, &mut r);
    for sweep in 0..400 {
        gibbs_sweep(&mut state, &ds, &cfg, &mut r).unwrap();
        if sweep % 50 == 49 {
            let counts = state.class_counts(100);
            let mut nonzero: Vec<u64> = counts.iter().copied().filter(|&c| c > 0).collect();
            nonzero.sort_unstable_by(|a, b| b.cmp(a));
            println!("sweep {sweep}: alpha={:.3} occupied={} sizes={:?}", state.alpha, nonzero.len(), nonzero);
        }
    }
}

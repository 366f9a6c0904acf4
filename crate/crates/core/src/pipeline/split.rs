use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

/// Deterministic random split; the training side receives `round(n · fraction)` items.
pub fn split_train_val<T: Clone>(items: &[T], fraction: f64, seed: u64) -> (Vec<T>, Vec<T>) {
    assert!(
        fraction > 0.0 && fraction < 1.0,
        "fraction must lie in (0, 1)"
    );
    let idx = shuffled(items.len(), seed);
    let n_train = (items.len() as f64 * fraction).round() as usize;
    let pick = |ids: &[usize]| {
        let mut ids = ids.to_vec();
        ids.sort_unstable();
        ids.into_iter()
            .map(|i| items[i].clone())
            .collect::<Vec<T>>()
    };
    (pick(&idx[..n_train]), pick(&idx[n_train..]))
}

/// `k` (train, validation) folds; every item is validated exactly once.
pub fn k_folds<T: Clone>(items: &[T], k: usize, seed: u64) -> Vec<(Vec<T>, Vec<T>)> {
    assert!(k >= 2, "need at least two folds");
    let idx = shuffled(items.len(), seed);
    let mut fold_of = vec![0usize; items.len()];
    for (rank, &i) in idx.iter().enumerate() {
        fold_of[i] = rank % k;
    }
    (0..k)
        .map(|f| {
            let (mut train, mut val) = (Vec::new(), Vec::new());
            for (i, item) in items.iter().enumerate() {
                if fold_of[i] == f {
                    val.push(item.clone());
                } else {
                    train.push(item.clone());
                }
            }
            (train, val)
        })
        .collect()
}

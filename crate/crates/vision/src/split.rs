//! Stratified train/validation/test split.
//!
//! Partition sizes are the largest-remainder rounding of ratio × total. Each
//! class then gets the floor of ratio × class size per partition, and the
//! leftover units are placed by a small max-flow so that row and column sums
//! both come out exact (classic controlled rounding of a table).

use aerogh_core::simcore::DiseaseClass;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::VisionError;
use crate::imaging::LabeledImage;

pub const MIN_PER_CLASS: usize = 10;
pub const DEFAULT_RATIOS: [f64; 3] = [0.75, 0.15, 0.10];

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<LabeledImage>,
    pub val: Vec<LabeledImage>,
    pub test: Vec<LabeledImage>,
    pub seed: u64,
    pub ratios: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl DatasetSplit {
    pub fn counts(&self) -> SplitCounts {
        SplitCounts { train: self.train.len(), val: self.val.len(), test: self.test.len() }
    }

    pub fn parts(&self) -> [&[LabeledImage]; 3] {
        [&self.train, &self.val, &self.test]
    }
}

const EPS: f64 = 1e-9;

fn floor_frac(q: f64) -> (usize, bool) {
    let f = (q + EPS).floor();
    (f as usize, q - f > EPS)
}

/// Largest-remainder rounding of `ratios × total`; ties go to the earlier part.
pub fn partition_sizes(total: usize, ratios: &[f64; 3]) -> [usize; 3] {
    let mut sizes = [0; 3];
    let mut rema = [(0.0, 0usize); 3];
    for p in 0..3 {
        let q = ratios[p] * total as f64;
        let (f, _) = floor_frac(q);
        sizes[p] = f;
        rema[p] = (q - f as f64, p);
    }
    let mut left = total - sizes.iter().sum::<usize>().min(total);
    rema.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, p) in rema.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[p] += 1;
        left -= 1;
    }
    sizes
}

/// Per-class partition counts: rows sum to class sizes, columns to
/// [`partition_sizes`], every cell is floor or ceil of its ideal share.
pub fn stratified_counts(class_sizes: &[usize], ratios: &[f64; 3]) -> Vec<[usize; 3]> {
    let total: usize = class_sizes.iter().sum();
    let targets = partition_sizes(total, ratios);
    let k = class_sizes.len();
    let mut cells = vec![[0usize; 3]; k];
    let mut frac = vec![[false; 3]; k];
    for (c, &n) in class_sizes.iter().enumerate() {
        for p in 0..3 {
            let (f, has) = floor_frac(ratios[p] * n as f64);
            cells[c][p] = f;
            frac[c][p] = has;
        }
    }
    // nodes: 0 source, 1..=k classes, k+1..=k+3 partitions, k+4 sink
    let (source, sink) = (0, k + 4);
    let mut cap = vec![vec![0i64; k + 5]; k + 5];
    for c in 0..k {
        cap[source][1 + c] = class_sizes[c] as i64 - cells[c].iter().sum::<usize>() as i64;
        for p in 0..3 {
            if frac[c][p] {
                cap[1 + c][k + 1 + p] = 1;
            }
        }
    }
    for p in 0..3 {
        cap[k + 1 + p][sink] = targets[p] as i64 - cells.iter().map(|r| r[p]).sum::<usize>() as i64;
    }
    let flow = max_flow(&mut cap, source, sink);
    debug_assert_eq!(flow, total as i64 - cells.iter().flatten().sum::<usize>() as i64);
    for c in 0..k {
        for p in 0..3 {
            // residual capacity back from partition to class = units placed
            if frac[c][p] && cap[1 + c][k + 1 + p] == 0 {
                cells[c][p] += 1;
            }
        }
    }
    cells
}

/// Depth-first augmenting paths over a dense capacity matrix, visiting
/// neighbours in index order so the result is deterministic.
fn max_flow(cap: &mut [Vec<i64>], s: usize, t: usize) -> i64 {
    fn dfs(cap: &mut [Vec<i64>], u: usize, t: usize, seen: &mut [bool]) -> bool {
        if u == t {
            return true;
        }
        seen[u] = true;
        for v in 0..cap.len() {
            if !seen[v] && cap[u][v] > 0 && dfs(cap, v, t, seen) {
                cap[u][v] -= 1;
                cap[v][u] += 1;
                return true;
            }
        }
        false
    }
    let mut flow = 0;
    loop {
        let mut seen = vec![false; cap.len()];
        if !dfs(cap, s, t, &mut seen) {
            return flow;
        }
        flow += 1;
    }
}

/// Stratified shuffle split of `images` by class.
pub fn split(images: &[LabeledImage], ratios: [f64; 3], seed: u64) -> Result<DatasetSplit, VisionError> {
    if ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(VisionError::Config(format!("split ratios {ratios:?} must be >= 0 and sum to 1")));
    }
    let mut by_class: Vec<Vec<&LabeledImage>> = vec![Vec::new(); 3];
    for img in images {
        by_class[img.label.index()].push(img);
    }
    for class in DiseaseClass::ALL {
        let n = by_class[class.index()].len();
        if n < MIN_PER_CLASS {
            return Err(VisionError::Dataset(format!(
                "class {} has {n} images, need at least {MIN_PER_CLASS}",
                class.name()
            )));
        }
    }
    let sizes: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let counts = stratified_counts(&sizes, &ratios);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts: [Vec<LabeledImage>; 3] = Default::default();
    for (members, row) in by_class.iter_mut().zip(&counts) {
        members.shuffle(&mut rng);
        let mut it = members.iter();
        for (part, &n) in parts.iter_mut().zip(row) {
            part.extend(it.by_ref().take(n).map(|img| (*img).clone()));
        }
    }
    let [train, val, test] = parts;
    Ok(DatasetSplit { train, val, test, seed, ratios })
}

//! Task sequences built from one MNIST split.

use crate::config::HeadMode;
use crate::error::{HlopError, Result};
use crate::mnist::Dataset;
use crate::numeric::{streams, Rng};

#[derive(Clone, Debug, PartialEq)]
pub enum TaskKind {
    /// Pixel `i` of the task image is pixel `perm[i]` of the original.
    Permutation(Vec<usize>),
    /// Only these classes appear; with per-task heads only their outputs
    /// are read.
    Classes(Vec<usize>),
}

#[derive(Clone, Debug)]
pub struct Task {
    pub name: String,
    pub train: Dataset,
    pub test: Dataset,
    pub kind: TaskKind,
}

impl Task {
    /// Output units this task may use under `head`.
    pub fn classes(&self, head: HeadMode) -> Option<&[usize]> {
        match (&self.kind, head) {
            (TaskKind::Classes(c), HeadMode::Multi) => Some(c),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TaskSequence {
    pub tasks: Vec<Task>,
    pub head_mode: HeadMode,
}

/// Pixel permutations for `n_tasks` tasks: identity first, then seeded
/// Fisher–Yates shuffles.
pub fn pmnist_permutations(n_tasks: usize, pixels: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = Rng::with_stream(seed, streams::DATA);
    (0..n_tasks)
        .map(|t| if t == 0 { (0..pixels).collect() } else { rng.permutation(pixels) })
        .collect()
}

fn permute(data: &Dataset, perm: &[usize]) -> Dataset {
    let mut out = data.clone();
    for r in 0..data.len() {
        let src = data.images.row(r);
        for (dst, &p) in out.images.row_mut(r).iter_mut().zip(perm) {
            *dst = src[p];
        }
    }
    out
}

fn subset(data: &Dataset, n: usize, rng: &mut Rng, what: &str) -> Result<Dataset> {
    if n > data.len() {
        return Err(HlopError::InvalidArgument(format!("{what}: {n} samples requested, {} available", data.len())));
    }
    let mut idx = rng.permutation(data.len());
    idx.truncate(n);
    Ok(data.select(&idx))
}

/// Permuted-MNIST tasks with a shared classifier. Each task draws its own
/// seeded subset of `train_per_task` / `test_per_task` samples.
pub fn make_pmnist_tasks(
    train: &Dataset,
    test: &Dataset,
    n_tasks: usize,
    seed: u64,
    train_per_task: usize,
    test_per_task: usize,
) -> Result<TaskSequence> {
    if n_tasks == 0 {
        return Err(HlopError::InvalidArgument("make_pmnist_tasks: n_tasks must be at least 1".into()));
    }
    let pixels = train.images.cols();
    let perms = pmnist_permutations(n_tasks, pixels, seed);
    // Subsets come from their own stream so the permutations do not depend
    // on the subset sizes.
    let mut rng = Rng::with_stream(seed ^ 0x5eed_5eed, streams::DATA);
    let tasks = perms
        .into_iter()
        .enumerate()
        .map(|(t, perm)| {
            Ok(Task {
                name: format!("pmnist-{t}"),
                train: permute(&subset(train, train_per_task, &mut rng, "train")?, &perm),
                test: permute(&subset(test, test_per_task, &mut rng, "test")?, &perm),
                kind: TaskKind::Permutation(perm),
            })
        })
        .collect::<Result<_>>()?;
    Ok(TaskSequence { tasks, head_mode: HeadMode::Single })
}

/// Split MNIST: task `t` holds digits `2t` and `2t+1`, capped at the given
/// per-task sizes.
pub fn make_split_mnist_tasks(
    train: &Dataset,
    test: &Dataset,
    n_tasks: usize,
    seed: u64,
    train_per_task: usize,
    test_per_task: usize,
    head_mode: HeadMode,
) -> Result<TaskSequence> {
    if n_tasks == 0 || n_tasks > 5 {
        return Err(HlopError::InvalidArgument(format!("split MNIST has 1 to 5 tasks, got {n_tasks}")));
    }
    let mut rng = Rng::with_stream(seed, streams::DATA);
    let pick = |data: &Dataset, classes: &[usize], cap: usize, rng: &mut Rng| {
        let mut idx: Vec<usize> = (0..data.len()).filter(|&i| classes.contains(&data.labels[i])).collect();
        rng.shuffle(&mut idx);
        idx.truncate(cap);
        data.select(&idx)
    };
    let tasks = (0..n_tasks)
        .map(|t| {
            let classes = vec![2 * t, 2 * t + 1];
            Task {
                name: format!("split-{}{}", classes[0], classes[1]),
                train: pick(train, &classes, train_per_task, &mut rng),
                test: pick(test, &classes, test_per_task, &mut rng),
                kind: TaskKind::Classes(classes),
            }
        })
        .collect();
    Ok(TaskSequence { tasks, head_mode })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Matrix;

    fn tiny(n: usize) -> Dataset {
        let data = (0..n * 4).map(|i| (i % 7) as f64 / 7.0).collect();
        Dataset { images: Matrix::from_vec(n, 4, data).unwrap(), labels: (0..n).map(|i| i % 10).collect(), height: 2, width: 2 }
    }

    #[test]
    fn permutations_are_bijections_and_seeded() {
        let a = pmnist_permutations(4, 784, 9);
        assert_eq!(a[0], (0..784).collect::<Vec<_>>());
        for p in &a {
            let mut s = p.clone();
            s.sort_unstable();
            assert_eq!(s, (0..784).collect::<Vec<_>>());
        }
        assert_eq!(a, pmnist_permutations(4, 784, 9));
        assert_ne!(a[1], pmnist_permutations(4, 784, 10)[1]);
    }

    #[test]
    fn single_task_is_the_original_data() {
        let d = tiny(20);
        let seq = make_pmnist_tasks(&d, &d, 1, 3, 20, 20).unwrap();
        let t = &seq.tasks[0];
        // Subset order is shuffled; compare as multisets of rows.
        let mut got: Vec<Vec<u64>> = (0..20).map(|r| t.train.images.row(r).iter().map(|v| v.to_bits()).collect()).collect();
        let mut want: Vec<Vec<u64>> = (0..20).map(|r| d.images.row(r).iter().map(|v| v.to_bits()).collect()).collect();
        got.sort();
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn permuted_pixels_follow_the_permutation() {
        let d = tiny(10);
        let seq = make_pmnist_tasks(&d, &d, 2, 1, 10, 10).unwrap();
        let TaskKind::Permutation(p) = &seq.tasks[1].kind else { panic!() };
        let t = &seq.tasks[1].train;
        let row = t.images.row(0);
        let label = t.labels[0];
        // Find a source row with that label whose permuted pixels match.
        assert!((0..d.len()).any(|r| d.labels[r] == label && p.iter().enumerate().all(|(i, &j)| row[i] == d.images[(r, j)])));
    }

    #[test]
    fn split_tasks_hold_their_classes() {
        let d = tiny(100);
        let seq = make_split_mnist_tasks(&d, &d, 5, 2, 1000, 1000, HeadMode::Multi).unwrap();
        for (t, task) in seq.tasks.iter().enumerate() {
            assert!(task.train.labels.iter().all(|&l| l / 2 == t));
            assert_eq!(task.train.len(), 20);
            assert_eq!(task.classes(HeadMode::Multi), Some(&[2 * t, 2 * t + 1][..]));
            assert_eq!(task.classes(HeadMode::Single), None);
        }
    }

    #[test]
    fn oversized_subset_rejected() {
        let d = tiny(5);
        assert!(make_pmnist_tasks(&d, &d, 1, 0, 6, 1).is_err());
        assert!(make_pmnist_tasks(&d, &d, 0, 0, 1, 1).is_err());
    }
}

//! Class-balanced evaluation subset selection.

use alloc::vec::Vec;

use crate::{Error, Rng, Result};

/// Number of images drawn per class: the smallest `C` with
/// `C * class_count >= min_total`.
pub fn per_class_count(class_count: usize, min_total: usize) -> usize {
    min_total.div_ceil(class_count)
}

/// Picks the same number of images from every class, uniformly without
/// replacement, so that the total is at least `min_total`.
///
/// `labels[i]` is the class of image `i`. The returned indices are grouped
/// by class (class 0 first) and sorted within each class.
pub fn select_eval_subset(
    labels: &[usize],
    class_count: usize,
    min_total: usize,
    rng: &mut Rng,
) -> Result<Vec<usize>> {
    if class_count == 0 || min_total == 0 {
        return Err(Error::Invalid("class_count and min_total must be >= 1".into()));
    }
    let mut by_class: Vec<Vec<usize>> = (0..class_count).map(|_| Vec::new()).collect();
    for (i, &label) in labels.iter().enumerate() {
        if label >= class_count {
            return Err(Error::Invalid(alloc::format!(
                "label {label} of image {i} outside [0, {class_count})"
            )));
        }
        by_class[label].push(i);
    }
    let per_class = per_class_count(class_count, min_total);
    let mut out = Vec::with_capacity(per_class * class_count);
    for (class, members) in by_class.iter_mut().enumerate() {
        if members.len() < per_class {
            return Err(Error::ClassTooSmall {
                class,
                available: members.len(),
                required: per_class,
            });
        }
        // partial Fisher-Yates: the first `per_class` slots are the sample
        for slot in 0..per_class {
            let j = slot + rng.below_usize(members.len() - slot);
            members.swap(slot, j);
        }
        let mut chosen = members[..per_class].to_vec();
        chosen.sort_unstable();
        out.extend(chosen);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(classes: usize, per: usize) -> Vec<usize> {
        (0..classes * per).map(|i| i % classes).collect()
    }

    #[test]
    fn table_rows() {
        assert_eq!(per_class_count(200, 100), 1);
        assert_eq!(per_class_count(196, 100), 1);
        assert_eq!(per_class_count(100, 100), 1);
        assert_eq!(per_class_count(7, 100), 15);
        assert_eq!(per_class_count(16, 100), 7);
    }

    #[test]
    fn balanced_and_deterministic() {
        let l = labels(7, 20);
        let a = select_eval_subset(&l, 7, 100, &mut Rng::new(3)).unwrap();
        let b = select_eval_subset(&l, 7, 100, &mut Rng::new(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 105);
        for c in 0..7 {
            assert_eq!(a.iter().filter(|&&i| l[i] == c).count(), 15);
        }
        let mut dedup = a.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), a.len());
    }

    #[test]
    fn small_class_rejected() {
        let mut l = labels(4, 3);
        l.push(0);
        let err = select_eval_subset(&l, 4, 16, &mut Rng::new(0)).unwrap_err();
        assert!(matches!(err, Error::ClassTooSmall { required: 4, .. }));
    }
}

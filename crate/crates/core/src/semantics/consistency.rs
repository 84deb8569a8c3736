use super::ClassId;
use crate::features::{knn_ratio_match, Descriptor, Match};

/// One ratio-test matching pass per class over the features carrying that
/// label on both sides; indices refer to the full inputs. Output is grouped
/// by class id, then ordered by query index.
pub fn match_per_class(
    desc_a: &[Descriptor],
    labels_a: &[Option<ClassId>],
    desc_b: &[Descriptor],
    labels_b: &[Option<ClassId>],
    classes: impl IntoIterator<Item = ClassId>,
    ratio: f64,
) -> Vec<Match> {
    debug_assert_eq!(desc_a.len(), labels_a.len());
    debug_assert_eq!(desc_b.len(), labels_b.len());
    let select = |labels: &[Option<ClassId>], c: ClassId| -> Vec<usize> {
        (0..labels.len()).filter(|&i| labels[i] == Some(c)).collect()
    };
    let mut out = Vec::new();
    for c in classes {
        let (ia, ib) = (select(labels_a, c), select(labels_b, c));
        if ia.is_empty() || ib.len() < 2 {
            continue;
        }
        let qa: Vec<Descriptor> = ia.iter().map(|&i| desc_a[i].clone()).collect();
        let tb: Vec<Descriptor> = ib.iter().map(|&i| desc_b[i].clone()).collect();
        out.extend(knn_ratio_match(&qa, &tb, ratio).into_iter().map(|m| Match {
            query_index: ia[m.query_index],
            train_index: ib[m.train_index],
            ..m
        }));
    }
    out
}

/// Keeps matches whose two endpoints carry the same (present) label; order
/// is preserved.
pub fn filter_matches_by_class(
    matches: &[Match],
    labels_a: &[Option<ClassId>],
    labels_b: &[Option<ClassId>],
) -> Vec<Match> {
    matches
        .iter()
        .filter(|m| {
            let la = labels_a.get(m.query_index).copied().flatten();
            let lb = labels_b.get(m.train_index).copied().flatten();
            la.is_some() && la == lb
        })
        .copied()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(q: usize, t: usize) -> Match {
        Match {
            query_index: q,
            train_index: t,
            distance: 0.1,
            ratio: 0.2,
        }
    }

    #[test]
    fn filter_examples() {
        let la = [Some(0), Some(0), None];
        let lb = [Some(0), Some(1), Some(0)];
        let kept = filter_matches_by_class(&[m(0, 0), m(1, 1), m(2, 2)], &la, &lb);
        assert_eq!(kept, vec![m(0, 0)]);
    }

    #[test]
    fn unlabeled_features_never_match_per_class() {
        let d: Vec<Descriptor> = (0..4)
            .map(|i| Descriptor::from_raw((0..8).map(|j| ((i * 8 + j) as f64).sin()).collect()))
            .collect();
        let none = vec![None; 4];
        assert!(match_per_class(&d, &none, &d, &none, 0..8, 0.7).is_empty());
    }
}

use std::collections::HashSet;

/// Set comparison of two corpora by token sequence. Listings keep
/// first-appearance order and contain each sequence once.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CorpusDiff {
    pub only_in_a: Vec<Vec<String>>,
    pub only_in_b: Vec<Vec<String>>,
    pub common: Vec<Vec<String>>,
}

impl CorpusDiff {
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.only_in_a.len(), self.only_in_b.len(), self.common.len())
    }
}

fn unique<S: AsRef<[String]>>(corpus: &[S]) -> Vec<Vec<String>> {
    let mut seen = HashSet::new();
    corpus
        .iter()
        .map(|s| s.as_ref().to_vec())
        .filter(|s| seen.insert(s.clone()))
        .collect()
}

pub fn diff_corpora<A: AsRef<[String]>, B: AsRef<[String]>>(a: &[A], b: &[B]) -> CorpusDiff {
    let ua = unique(a);
    let ub = unique(b);
    let set_a: HashSet<&Vec<String>> = ua.iter().collect();
    let set_b: HashSet<&Vec<String>> = ub.iter().collect();
    CorpusDiff {
        only_in_a: ua.iter().filter(|s| !set_b.contains(s)).cloned().collect(),
        only_in_b: ub.iter().filter(|s| !set_a.contains(s)).cloned().collect(),
        common: ua.iter().filter(|s| set_b.contains(s)).cloned().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(lines: &[&str]) -> Vec<Vec<String>> {
        lines
            .iter()
            .map(|l| l.split(' ').map(str::to_owned).collect())
            .collect()
    }

    #[test]
    fn self_diff_and_disjoint() {
        let x = c(&["a b", "c", "a b"]);
        assert_eq!(diff_corpora(&x, &x).counts(), (0, 0, 2));
        let y = c(&["d"]);
        assert_eq!(diff_corpora(&x, &y).counts(), (2, 1, 0));
    }

    #[test]
    fn partial_overlap_keeps_order() {
        let d = diff_corpora(&c(&["x", "y", "z"]), &c(&["z", "w", "x"]));
        assert_eq!(d.only_in_a, c(&["y"]));
        assert_eq!(d.only_in_b, c(&["w"]));
        assert_eq!(d.common, c(&["x", "z"]));
    }
}

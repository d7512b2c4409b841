use serde::{Deserialize, Serialize};

/// Breslow risk sets `R_i = {j : T_j >= T_i}` laid out as prefixes of a
/// single descending-time ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskSetIndex {
    pub time: Vec<f64>,
    pub event: Vec<bool>,
    /// Subject indices by descending time (ties by ascending index).
    pub order: Vec<usize>,
    /// `|R_i|` for every subject; `R_i` is `order[..risk_len[i]]`.
    pub risk_len: Vec<usize>,
    /// Indices of event subjects.
    pub events: Vec<usize>,
}

impl RiskSetIndex {
    pub fn new(time: &[f64], event: &[bool]) -> Self {
        assert_eq!(time.len(), event.len(), "times and event flags differ in length");
        let n = time.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| time[b].total_cmp(&time[a]).then(a.cmp(&b)));
        let mut risk_len = vec![0; n];
        let mut start = 0;
        while start < n {
            let t = time[order[start]];
            let mut end = start;
            while end < n && time[order[end]] == t {
                end += 1;
            }
            for &i in &order[start..end] {
                risk_len[i] = end;
            }
            start = end;
        }
        Self {
            time: time.to_vec(),
            event: event.to_vec(),
            order,
            risk_len,
            events: (0..n).filter(|&i| event[i]).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.time.len()
    }

    pub fn members(&self, i: usize) -> &[usize] {
        &self.order[..self.risk_len[i]]
    }

    /// Tie groups in descending time as `(start, end)` ranges into `order`.
    pub(crate) fn groups(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut start = 0;
        while start < self.n() {
            let end = self.risk_len[self.order[start]];
            out.push((start, end));
            start = end;
        }
        out
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        let time: Vec<f64> = idx.iter().map(|&i| self.time[i]).collect();
        let event: Vec<bool> = idx.iter().map(|&i| self.event[i]).collect();
        Self::new(&time, &event)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(v: &[usize]) -> Vec<usize> {
        let mut v = v.to_vec();
        v.sort_unstable();
        v
    }

    #[test]
    fn enumerated_risk_sets() {
        let r = RiskSetIndex::new(&[1.0, 2.0, 3.0], &[true, true, false]);
        assert_eq!(sorted(r.members(0)), vec![0, 1, 2]);
        assert_eq!(sorted(r.members(1)), vec![1, 2]);
        assert_eq!(r.events, vec![0, 1]);
    }

    #[test]
    fn ties_share_the_full_set() {
        let r = RiskSetIndex::new(&[2.0; 4], &[true; 4]);
        for i in 0..4 {
            assert_eq!(sorted(r.members(i)), vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn singleton() {
        let r = RiskSetIndex::new(&[0.5], &[true]);
        assert_eq!(r.members(0), &[0]);
    }

    proptest::proptest! {
        #[test]
        fn prefixes_match_definition(times in proptest::collection::vec(0u8..6, 1..30)) {
            let time: Vec<f64> = times.iter().map(|&t| t as f64).collect();
            let event = vec![true; time.len()];
            let r = RiskSetIndex::new(&time, &event);
            for i in 0..time.len() {
                let direct: Vec<usize> = (0..time.len()).filter(|&j| time[j] >= time[i]).collect();
                proptest::prop_assert_eq!(sorted(r.members(i)), direct);
                proptest::prop_assert!(r.members(i).contains(&i));
            }
        }
    }
}

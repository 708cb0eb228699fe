use std::cell::RefCell;
use std::collections::HashMap;

use super::Structure;

/// Canonical serialization of a structure with a centre tuple. Two pointed
/// structures over the same signature are isomorphic (centres mapped
/// pointwise) iff their codes are equal. Layout: universe size, number of
/// centres, relabeled centres, then per relation the tuple count followed
/// by the sorted relabeled tuples.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonCode(pub Vec<u32>);

impl CanonCode {
    pub fn universe_size(&self) -> usize {
        self.0.first().copied().unwrap_or(0) as usize
    }
}

const MEMO_LIMIT: usize = 1 << 17;

thread_local! {
    static MEMO: RefCell<HashMap<(Structure, Vec<usize>), CanonCode>> = RefCell::new(HashMap::new());
}

/// Canonical code of (S, c̄), memoized per thread.
pub fn canonical_code(s: &Structure, centres: &[usize]) -> CanonCode {
    let key = (s.clone(), centres.to_vec());
    if let Some(c) = MEMO.with(|m| m.borrow().get(&key).cloned()) {
        return c;
    }
    let code = canonical_form(s, centres).0;
    MEMO.with(|m| {
        let mut m = m.borrow_mut();
        if m.len() >= MEMO_LIMIT {
            m.clear();
        }
        m.insert(key, code.clone());
    });
    code
}

/// Canonical code plus a relabeling `perm[old] = new` that realizes it.
/// Distinct centres receive labels 0, 1, ... in order of first appearance;
/// the remaining elements are ordered by the least code over an
/// individualize-and-refine search tree.
pub fn canonical_form(s: &Structure, centres: &[usize]) -> (CanonCode, Vec<usize>) {
    let n = s.size();
    let mut incident: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (r, tuples) in s.relations().iter().enumerate() {
        for (i, t) in tuples.iter().enumerate() {
            let mut seen: Vec<usize> = Vec::new();
            for &e in t {
                if !seen.contains(&e) {
                    seen.push(e);
                    incident[e].push((r, i));
                }
            }
        }
    }
    let mut distinct: Vec<usize> = Vec::new();
    for &c in centres {
        if !distinct.contains(&c) {
            distinct.push(c);
        }
    }
    let dists: Vec<Vec<Option<usize>>> = distinct.iter().map(|&c| s.distances_from(&[c])).collect();
    // initial colour: centres by position, others by distance profile
    let mut keys: Vec<(u32, Vec<u32>)> = (0..n)
        .map(|v| match distinct.iter().position(|&c| c == v) {
            Some(i) => (0, vec![i as u32]),
            None => (
                1,
                dists
                    .iter()
                    .map(|d| d[v].map_or(u32::MAX, |x| x as u32))
                    .collect(),
            ),
        })
        .collect();
    let colours = rank(&mut keys);
    let ctx = Ctx {
        s,
        incident: &incident,
        centres,
    };
    let colours = ctx.refine(colours);
    let mut best: Option<(Vec<u32>, Vec<usize>)> = None;
    ctx.search(colours, &mut best);
    let (code, perm) = best.expect("search visits at least one leaf");
    (CanonCode(code), perm)
}

/// Dense ranks of the keys, ordered by key.
fn rank<K: Ord + Clone>(keys: &mut [K]) -> Vec<u32> {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).expect("key present") as u32)
        .collect()
}

struct Ctx<'a> {
    s: &'a Structure,
    incident: &'a [Vec<(usize, usize)>],
    centres: &'a [usize],
}

impl Ctx<'_> {
    fn classes(colours: &[u32]) -> usize {
        colours.iter().copied().max().map_or(0, |m| m as usize + 1)
    }

    /// Colour refinement to a stable partition. Ranks preserve the order of
    /// the previous colours, so it only ever splits classes.
    fn refine(&self, mut colours: Vec<u32>) -> Vec<u32> {
        loop {
            let before = Self::classes(&colours);
            if before == colours.len() {
                return colours;
            }
            let mut keys: Vec<(u32, Vec<(usize, u32, Vec<u32>)>)> = (0..colours.len())
                .map(|v| {
                    let mut sig: Vec<(usize, u32, Vec<u32>)> = self.incident[v]
                        .iter()
                        .map(|&(r, i)| {
                            let t = &self.s.tuples(r)[i];
                            let mask = t
                                .iter()
                                .enumerate()
                                .filter(|(_, &e)| e == v)
                                .fold(0u32, |m, (p, _)| m | (1 << p));
                            (r, mask, t.iter().map(|&e| colours[e]).collect())
                        })
                        .collect();
                    sig.sort();
                    (colours[v], sig)
                })
                .collect();
            colours = rank(&mut keys);
            if Self::classes(&colours) == before {
                return colours;
            }
        }
    }

    fn search(&self, colours: Vec<u32>, best: &mut Option<(Vec<u32>, Vec<usize>)>) {
        let n = colours.len();
        let classes = Self::classes(&colours);
        if classes == n {
            let perm: Vec<usize> = colours.iter().map(|&c| c as usize).collect();
            let code = self.encode(&perm);
            if best.as_ref().map_or(true, |(b, _)| code < *b) {
                *best = Some((code, perm));
            }
            return;
        }
        let mut size = vec![0usize; classes];
        for &c in &colours {
            size[c as usize] += 1;
        }
        let target = size
            .iter()
            .position(|&k| k > 1)
            .expect("some class is not a singleton") as u32;
        for v in (0..n).filter(|&v| colours[v] == target) {
            let split: Vec<u32> = colours
                .iter()
                .enumerate()
                .map(|(w, &c)| {
                    if c > target || (c == target && w != v) {
                        c + 1
                    } else {
                        c
                    }
                })
                .collect();
            self.search(self.refine(split), best);
        }
    }

    fn encode(&self, perm: &[usize]) -> Vec<u32> {
        let s = self.s;
        let mut code = Vec::with_capacity(3 + self.centres.len() + 3 * s.tuple_count());
        code.push(s.size() as u32);
        code.push(self.centres.len() as u32);
        code.extend(self.centres.iter().map(|&c| perm[c] as u32));
        for tuples in s.relations() {
            code.push(tuples.len() as u32);
            let mut relabeled: Vec<Vec<u32>> = tuples
                .iter()
                .map(|t| t.iter().map(|&e| perm[e] as u32).collect())
                .collect();
            relabeled.sort_unstable();
            for t in relabeled {
                code.extend(t);
            }
        }
        code
    }
}

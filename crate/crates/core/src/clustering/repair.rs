/// Moves points into empty clusters.
///
/// Each empty cluster, in ascending order, takes the point farthest from its
/// current center (lowest index among ties) among points whose cluster would
/// stay non-empty. The moved point's distance becomes zero since the caller
/// makes it the new center. Returns the `(cluster, point)` moves.
pub(crate) fn repair_empty(labels: &mut [u32], dists: &mut [f64], k: usize) -> Vec<(usize, usize)> {
    let mut sizes = vec![0usize; k];
    for &c in labels.iter() {
        sizes[c as usize] += 1;
    }
    let mut moves = Vec::new();
    for c in 0..k {
        if sizes[c] != 0 {
            continue;
        }
        let mut far: Option<(usize, f64)> = None;
        for (n, (&lab, &d)) in labels.iter().zip(dists.iter()).enumerate() {
            if sizes[lab as usize] > 1 && far.is_none_or(|(_, best)| d > best) {
                far = Some((n, d));
            }
        }
        // N >= K guarantees a donor cluster with at least two members.
        let (n, _) = far.expect("no donor cluster for empty-cluster repair");
        sizes[labels[n] as usize] -= 1;
        sizes[c] = 1;
        labels[n] = c as u32;
        dists[n] = 0.0;
        moves.push((c, n));
    }
    moves
}

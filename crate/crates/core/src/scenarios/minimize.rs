/// Greedy reduction of a failing input: removes ever smaller chunks while
/// `still_fails` keeps holding. When failure is monotone (supersets of a
/// failing input fail too) the result is 1-minimal: dropping any single
/// remaining item makes the failure disappear.
pub fn minimize<T: Clone, F: FnMut(&[T]) -> bool>(items: Vec<T>, mut still_fails: F) -> Vec<T> {
    let mut current = items;
    let mut chunk = current.len().div_ceil(2).max(1);
    loop {
        let mut start = 0;
        while start < current.len() {
            let end = (start + chunk).min(current.len());
            let candidate: Vec<T> = current[..start].iter().chain(&current[end..]).cloned().collect();
            if still_fails(&candidate) {
                current = candidate;
            } else {
                start = end;
            }
        }
        if chunk == 1 {
            return current;
        }
        chunk = chunk.div_ceil(2);
    }
}

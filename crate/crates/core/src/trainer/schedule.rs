use crate::error::Level;

/// Level trained at `index` under the alternating schedule: `m` clip batches,
/// then `n` phase batches, then `l` video batches, repeated.
///
/// Counts may be zero to drop a level, but not all three.
pub fn schedule_level(index: u64, m: u64, n: u64, l: u64) -> Level {
    let period = m + n + l;
    assert!(period > 0, "schedule period must be positive");
    let r = index % period;
    if r < m {
        Level::Clip
    } else if r < m + n {
        Level::Phase
    } else {
        Level::Video
    }
}

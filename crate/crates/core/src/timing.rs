//! Round clock and the `age` / `live` / `ready` predicates.
//!
//! Round `r` owns the window `[start(r), start(r) + n*delta]`. A path
//! signature of length `k` is accepted while `age <= k*delta` and its move may
//! be executed once `age > n*delta`. Bounds are exact: `live` uses `<=`,
//! `ready` uses `>`.

use crate::ids::Tick;
use crate::path::PathSignature;

/// Ticks elapsed since the start of the request's round, saturating at zero
/// for requests that arrive before their round has started.
pub fn age(now: Tick, round_start: Tick) -> Tick {
    now.saturating_sub(round_start)
}

pub fn is_live(ps: &PathSignature, now: Tick, round_start: Tick, delta: Tick) -> bool {
    live_for_len(ps.len(), now, round_start, delta)
}

pub fn live_for_len(path_len: usize, now: Tick, round_start: Tick, delta: Tick) -> bool {
    age(now, round_start) <= delta * path_len as u64
}

pub fn is_ready(_ps: &PathSignature, now: Tick, round_start: Tick, n: usize, delta: Tick) -> bool {
    window_elapsed(now, round_start, n, delta)
}

/// `age > n*delta`: the round's window is over.
pub fn window_elapsed(now: Tick, round_start: Tick, n: usize, delta: Tick) -> bool {
    age(now, round_start) > delta * n as u64
}

/// End of initialization and start of round 1: funding takes `delta`, the
/// verification round takes `n*delta`.
pub fn first_round_start(n: usize, delta: Tick) -> Tick {
    delta * (n as u64 + 1)
}

/// Start of round `r` when every earlier round took its full window.
pub fn scheduled_round_start(round: u64, n: usize, delta: Tick) -> Tick {
    first_round_start(n, delta) + delta * (n as u64 * round.saturating_sub(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn age_is_elapsed_time() {
        assert_eq!(age(Tick(45), Tick(40)), Tick(5));
        assert_eq!(age(Tick(40), Tick(40)), Tick(0));
        assert_eq!(age(Tick(30), Tick(40)), Tick(0));
    }

    #[test]
    fn age_in_round_two() {
        let (n, delta) = (3, Tick(10));
        assert_eq!(first_round_start(n, delta), Tick(40));
        let start = scheduled_round_start(2, n, delta);
        assert_eq!(start, Tick(70));
        assert_eq!(age(Tick(75), start), Tick(5));
    }

    #[test]
    fn live_window_grows_with_path() {
        let d = Tick(10);
        assert!(live_for_len(1, Tick(5), Tick(0), d));
        assert!(!live_for_len(1, Tick(11), Tick(0), d));
        assert!(live_for_len(2, Tick(11), Tick(0), d));
        assert!(live_for_len(3, Tick(30), Tick(0), d));
        assert!(!live_for_len(3, Tick(31), Tick(0), d));
    }

    #[test]
    fn ready_is_strict() {
        let d = Tick(10);
        assert!(!window_elapsed(Tick(0), Tick(0), 3, d));
        assert!(!window_elapsed(Tick(30), Tick(0), 3, d));
        assert!(window_elapsed(Tick(31), Tick(0), 3, d));
    }
}

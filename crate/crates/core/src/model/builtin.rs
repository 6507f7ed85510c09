//! The two-agent benchmark problems: Dec-Tiger (two reward variants) and the
//! multi-access broadcast channel.

use super::{DecPomdp, ModelError, ModelParts};

pub const BUILTIN_NAMES: [&str; 3] = ["tiger-a", "tiger-b", "channel"];

/// Returns one of the built-in problems by name.
pub fn builtin(name: &str) -> Result<DecPomdp, ModelError> {
    match name {
        "tiger-a" => Ok(tiger(-50.0)),
        "tiger-b" => Ok(tiger(0.0)),
        "channel" => Ok(channel()),
        other => Err(ModelError::UnknownBuiltin(other.to_string())),
    }
}

const LISTEN: usize = 0;
const OPEN_LEFT: usize = 1;
const OPEN_RIGHT: usize = 2;
const LISTEN_ACCURACY: f64 = 0.85;

fn strings(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Dec-Tiger. `joint_tiger_reward` is the reward when both agents open the
/// door hiding the tiger: -50 in version A, 0 in version B.
fn tiger(joint_tiger_reward: f64) -> DecPomdp {
    let n_states = 2;
    let n_actions = 3;
    let n_joint = n_actions * n_actions;
    let n_joint_obs = 4;

    let mut transition = vec![0.0; n_states * n_joint * n_states];
    let mut observation = vec![0.0; n_states * n_joint * n_joint_obs];
    let mut reward = vec![0.0; n_states * n_joint];

    for s in 0..n_states {
        let tiger_door = if s == 0 { OPEN_LEFT } else { OPEN_RIGHT };
        for a0 in 0..n_actions {
            for a1 in 0..n_actions {
                let ja = a0 * n_actions + a1;
                let both_listen = a0 == LISTEN && a1 == LISTEN;

                // Listening leaves the tiger in place; any door opening resets
                // the problem to a uniformly random tiger position.
                for next in 0..n_states {
                    transition[(s * n_joint + ja) * n_states + next] = if both_listen {
                        if next == s { 1.0 } else { 0.0 }
                    } else {
                        0.5
                    };
                }

                // Observation rows are indexed by the destination state `s`.
                for o0 in 0..2 {
                    for o1 in 0..2 {
                        let jo = o0 * 2 + o1;
                        let p = if both_listen {
                            let hear = |o: usize| if o == s { LISTEN_ACCURACY } else { 1.0 - LISTEN_ACCURACY };
                            hear(o0) * hear(o1)
                        } else {
                            0.25
                        };
                        observation[(s * n_joint + ja) * n_joint_obs + jo] = p;
                    }
                }

                let opens_tiger = |a: usize| a == tiger_door;
                let opens_treasure = |a: usize| a != LISTEN && a != tiger_door;
                reward[s * n_joint + ja] = match (a0, a1) {
                    (LISTEN, LISTEN) => -2.0,
                    (x, y) if x == y && opens_tiger(x) => joint_tiger_reward,
                    (x, y) if x == y && opens_treasure(x) => 20.0,
                    (LISTEN, x) | (x, LISTEN) if opens_tiger(x) => -101.0,
                    (LISTEN, x) | (x, LISTEN) if opens_treasure(x) => 9.0,
                    _ => -100.0,
                };
            }
        }
    }

    DecPomdp::new(ModelParts {
        states: strings(&["tiger-left", "tiger-right"]),
        actions: vec![strings(&["listen", "open-left", "open-right"]); 2],
        observations: vec![strings(&["hear-left", "hear-right"]); 2],
        transition,
        observation,
        reward,
        start: vec![0.5, 0.5],
    })
    .expect("tiger tables are stochastic")
}

const SEND: usize = 0;
const REFILL: [f64; 2] = [0.9, 0.1];
const COLLISION_ACCURACY: f64 = 0.9;

/// Two-agent broadcast channel. State `(b0, b1)` is encoded as `b0 * 2 + b1`
/// with 0 = full and 1 = empty.
fn channel() -> DecPomdp {
    let n_states = 4;
    let n_joint = 4;
    let n_joint_obs = 4;
    let full = |s: usize, agent: usize| (if agent == 0 { s / 2 } else { s % 2 }) == 0;

    let mut transition = vec![0.0; n_states * n_joint * n_states];
    let mut observation = vec![0.0; n_states * n_joint * n_joint_obs];
    let mut reward = vec![0.0; n_states * n_joint];

    for s in 0..n_states {
        for a0 in 0..2 {
            for a1 in 0..2 {
                let ja = a0 * 2 + a1;
                let acts = [a0, a1];
                let mut buffer_full = [full(s, 0), full(s, 1)];

                // A lone send from a full buffer delivers the message.
                let senders: Vec<usize> = (0..2).filter(|&i| acts[i] == SEND).collect();
                if let [i] = senders[..] {
                    if buffer_full[i] {
                        reward[s * n_joint + ja] = 1.0;
                        buffer_full[i] = false;
                    }
                }

                // Empty buffers, including one emptied this step, refill
                // independently.
                let per_agent = |i: usize, next_full: bool| match (buffer_full[i], next_full) {
                    (true, true) => 1.0,
                    (true, false) => 0.0,
                    (false, true) => REFILL[i],
                    (false, false) => 1.0 - REFILL[i],
                };
                for next in 0..n_states {
                    transition[(s * n_joint + ja) * n_states + next] =
                        per_agent(0, full(next, 0)) * per_agent(1, full(next, 1));
                }

                // Each agent observes the collision bit (0 = collision)
                // correctly with probability 0.9; the bit only depends on the
                // joint action.
                let collided = senders.len() == 2;
                let truth = if collided { 0 } else { 1 };
                let sense = |o: usize| if o == truth { COLLISION_ACCURACY } else { 1.0 - COLLISION_ACCURACY };
                for o0 in 0..2 {
                    for o1 in 0..2 {
                        let p = sense(o0) * sense(o1);
                        for next in 0..n_states {
                            observation[(next * n_joint + ja) * n_joint_obs + o0 * 2 + o1] = p;
                        }
                    }
                }
            }
        }
    }

    DecPomdp::new(ModelParts {
        states: strings(&["full-full", "full-empty", "empty-full", "empty-empty"]),
        actions: vec![strings(&["send", "wait"]); 2],
        observations: vec![strings(&["collision", "clear"]); 2],
        transition,
        observation,
        reward,
        start: vec![1.0, 0.0, 0.0, 0.0],
    })
    .expect("channel tables are stochastic")
}

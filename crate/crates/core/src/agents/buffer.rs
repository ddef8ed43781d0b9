//! Experience storage: a step-level ring for the feedforward learners and
//! an episode-level ring for the recurrent one.

use rand::Rng;

#[derive(Debug, Clone)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
}

#[derive(Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    data: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        ReplayBuffer {
            capacity,
            data: Vec::new(),
            next: 0,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Uniform with replacement.
    pub fn sample<'a>(&'a self, batch: usize, rng: &mut impl Rng) -> Vec<&'a Transition> {
        assert!(!self.data.is_empty(), "cannot sample from an empty buffer");
        (0..batch)
            .map(|_| &self.data[rng.gen_range(0..self.data.len())])
            .collect()
    }
}

/// One finished episode, step-aligned: `rewards[t]` followed `actions[t]`
/// taken after seeing `obs[t]`.
#[derive(Debug, Clone, Default)]
pub struct Episode {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn push(&mut self, obs: Vec<f64>, action: Vec<f64>, reward: f64) {
        self.obs.push(obs);
        self.actions.push(action);
        self.rewards.push(reward);
    }
}

#[derive(Debug)]
pub struct EpisodeBuffer {
    capacity: usize,
    data: Vec<Episode>,
    next: usize,
}

impl EpisodeBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        EpisodeBuffer {
            capacity,
            data: Vec::new(),
            next: 0,
        }
    }

    pub fn push(&mut self, e: Episode) {
        assert!(!e.is_empty(), "refusing to store an empty episode");
        if self.data.len() < self.capacity {
            self.data.push(e);
        } else {
            self.data[self.next] = e;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn sample<'a>(&'a self, batch: usize, rng: &mut impl Rng) -> Vec<&'a Episode> {
        assert!(!self.data.is_empty(), "cannot sample from an empty buffer");
        (0..batch)
            .map(|_| &self.data[rng.gen_range(0..self.data.len())])
            .collect()
    }
}

//! Breadth-first search over the symbolic swap problem: two cups, their
//! plates, and the empty plate. Moves are "pick cup" and "put cup inside
//! empty plate"; the first cup must leave its plate before the other one.

use std::collections::{BTreeMap, HashMap, VecDeque};

use tabletop_core::scene::{ObjectId, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Move {
    Pick(ObjectId),
    Put(ObjectId, ObjectId),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct State {
    /// Plate under each cup, `None` while held.
    at: [Option<ObjectId>; 2],
    /// Index of the cup that moved first.
    first_moved: Option<usize>,
}

pub struct SwapProblem {
    cups: [ObjectId; 2],
    plates: Vec<ObjectId>,
    start: State,
    goal: [ObjectId; 2],
}

impl SwapProblem {
    /// `first` is the cup that has to move first.
    pub fn from_world(world: &WorldState, first: ObjectId) -> Self {
        let other = world.objects.iter().find(|o| o.class_name == "cup" && o.id != first).expect("two cups").id;
        let home = |c: ObjectId| world.get(c).and_then(|o| o.container_of).expect("cups start on plates");
        let plates = world.objects.iter().filter(|o| o.class_name == "plate").map(|o| o.id).collect();
        SwapProblem {
            cups: [first, other],
            plates,
            start: State { at: [Some(home(first)), Some(home(other))], first_moved: None },
            goal: [home(other), home(first)],
        }
    }

    fn successors(&self, s: &State) -> Vec<(Move, State)> {
        let mut out = Vec::new();
        let held = s.at.iter().position(Option::is_none);
        match held {
            None => {
                for c in 0..2 {
                    let mut n = s.clone();
                    n.at[c] = None;
                    n.first_moved = n.first_moved.or(Some(c));
                    out.push((Move::Pick(self.cups[c]), n));
                }
            }
            Some(c) => {
                for &p in &self.plates {
                    if s.at.contains(&Some(p)) {
                        continue;
                    }
                    let mut n = s.clone();
                    n.at[c] = Some(p);
                    out.push((Move::Put(self.cups[c], p), n));
                }
            }
        }
        out
    }

    fn is_goal(&self, s: &State) -> bool {
        s.at == [Some(self.goal[0]), Some(self.goal[1])] && s.first_moved == Some(0)
    }

    /// Length of a shortest move sequence reaching the goal.
    pub fn shortest(&self) -> Option<usize> {
        let mut seen: HashMap<State, usize> = HashMap::from([(self.start.clone(), 0)]);
        let mut queue = VecDeque::from([self.start.clone()]);
        while let Some(s) = queue.pop_front() {
            let d = seen[&s];
            if self.is_goal(&s) {
                return Some(d);
            }
            for (_, n) in self.successors(&s) {
                if !seen.contains_key(&n) {
                    seen.insert(n.clone(), d + 1);
                    queue.push_back(n);
                }
            }
        }
        None
    }

    /// Whether `moves` is legal from the start and ends at the goal.
    pub fn accepts(&self, moves: &[Move]) -> bool {
        let mut s = self.start.clone();
        for m in moves {
            let next: BTreeMap<usize, State> =
                self.successors(&s).into_iter().filter(|(x, _)| x == m).map(|(_, n)| n).enumerate().collect();
            match next.into_values().next() {
                Some(n) => s = n,
                None => return false,
            }
        }
        self.is_goal(&s)
    }
}

use super::assignment::{validate_endpoints, Assignment};
use super::instance::MatchingInstance;
use super::MatchError;

/// Index-based working form of an [`Assignment`] used by the solvers.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CarState {
    /// Driver index of every commuter; drivers point at themselves.
    pub driver_of: Vec<usize>,
    /// Passengers of each driver (the driver excluded), ascending. Empty for non-drivers.
    pub riders: Vec<Vec<usize>>,
}

impl CarState {
    pub fn solo(n: usize) -> Self {
        Self { driver_of: (0..n).collect(), riders: vec![Vec::new(); n] }
    }

    pub fn from_assignment(inst: &MatchingInstance, a: &Assignment) -> Result<Self, MatchError> {
        let violations = validate_endpoints(a, inst.commuters(), inst.constraints());
        if !violations.is_empty() {
            return Err(MatchError::InvalidAssignment(violations));
        }
        let mut state = Self::solo(inst.len());
        for (&v, &d) in &a.assigned {
            let (vi, di) = (inst.index_of(v).unwrap(), inst.index_of(d).unwrap());
            state.driver_of[vi] = di;
            if vi != di {
                state.riders[di].push(vi);
            }
        }
        for r in &mut state.riders {
            r.sort_unstable();
        }
        Ok(state)
    }

    pub fn to_assignment(&self, inst: &MatchingInstance) -> Assignment {
        let id = |i: usize| inst.commuter(i).id;
        Assignment {
            drivers: (0..self.driver_of.len()).filter(|&i| self.is_driver(i)).map(id).collect(),
            assigned: self.driver_of.iter().enumerate().map(|(v, &d)| (id(v), id(d))).collect(),
        }
    }

    pub fn is_driver(&self, i: usize) -> bool {
        self.driver_of[i] == i
    }

    pub fn occupancy(&self, driver: usize) -> usize {
        self.riders[driver].len() + 1
    }

    pub fn car_count(&self) -> usize {
        (0..self.driver_of.len()).filter(|&i| self.is_driver(i)).count()
    }

    pub fn penalty_cost(&self, inst: &MatchingInstance) -> f64 {
        (0..self.driver_of.len()).filter(|&i| self.is_driver(i)).map(|i| inst.penalty(i)).sum()
    }

    pub fn car_distance(&self, inst: &MatchingInstance, driver: usize) -> f64 {
        self.riders[driver]
            .iter()
            .map(|&p| inst.virtual_distance(driver, p).expect("riders are feasible for their driver"))
            .sum()
    }

    pub fn cost(&self, inst: &MatchingInstance) -> f64 {
        let distance: f64 =
            (0..self.driver_of.len()).filter(|&i| self.is_driver(i)).map(|d| self.car_distance(inst, d)).sum();
        self.penalty_cost(inst) + distance
    }
}

//! Power system data: buses, lines, units, loads and renewable scenarios.
//!
//! Bus references everywhere are positions in [`GridCase::buses`]; ingestion
//! code that reads arbitrary bus labels goes through [`GridCase::from_labeled`].

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    #[serde(default)]
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from_bus: usize,
    pub to_bus: usize,
    pub reactance_pu: f64,
    pub capacity_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConventionalUnit {
    pub bus: usize,
    pub cost_da: f64,
    pub cost_up: f64,
    pub cost_down: f64,
    pub p_max: f64,
    #[serde(default)]
    pub p_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VresUnit {
    pub bus: usize,
    pub capacity_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadPoint {
    pub bus: usize,
    pub demand_mw: f64,
}

/// Non-fatal findings from [`GridCase::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Warning(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCase {
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub conventional_units: Vec<ConventionalUnit>,
    pub vres_units: Vec<VresUnit>,
    pub loads: Vec<LoadPoint>,
    pub voll: f64,
    pub reference_bus: usize,
}

impl GridCase {
    /// Builds a case whose bus references use arbitrary unique labels
    /// (`Bus::id`), renumbering everything to positions `0..n`.
    ///
    /// `reference_bus` is a label; `None` selects the lowest label.
    pub fn from_labeled(
        buses: Vec<Bus>,
        lines: Vec<Line>,
        conventional_units: Vec<ConventionalUnit>,
        vres_units: Vec<VresUnit>,
        loads: Vec<LoadPoint>,
        voll: f64,
        reference_bus: Option<usize>,
    ) -> Result<GridCase, Error> {
        if buses.is_empty() {
            return Err(Error::Validation("case has no buses".into()));
        }
        let mut buses = buses;
        buses.sort_by_key(|b| b.id);
        let mut index = BTreeMap::new();
        for (pos, b) in buses.iter().enumerate() {
            if index.insert(b.id, pos).is_some() {
                return Err(Error::Validation(format!("duplicate bus id {}", b.id)));
            }
        }
        let map = |label: usize, what: &str| {
            index
                .get(&label)
                .copied()
                .ok_or_else(|| Error::Validation(format!("{what} references unknown bus {label}")))
        };
        let lines = lines
            .into_iter()
            .enumerate()
            .map(|(i, l)| {
                Ok(Line { from_bus: map(l.from_bus, &format!("line {i}"))?, to_bus: map(l.to_bus, &format!("line {i}"))?, ..l })
            })
            .collect::<Result<Vec<_>, Error>>()?;
        let conventional_units = conventional_units
            .into_iter()
            .enumerate()
            .map(|(i, u)| Ok(ConventionalUnit { bus: map(u.bus, &format!("conventional unit {i}"))?, ..u }))
            .collect::<Result<Vec<_>, Error>>()?;
        let vres_units = vres_units
            .into_iter()
            .enumerate()
            .map(|(i, u)| Ok(VresUnit { bus: map(u.bus, &format!("vres unit {i}"))?, ..u }))
            .collect::<Result<Vec<_>, Error>>()?;
        let loads = loads
            .into_iter()
            .enumerate()
            .map(|(i, l)| Ok(LoadPoint { bus: map(l.bus, &format!("load {i}"))?, ..l }))
            .collect::<Result<Vec<_>, Error>>()?;
        let reference_bus = match reference_bus {
            Some(label) => map(label, "reference_bus")?,
            None => 0,
        };
        let buses = buses
            .into_iter()
            .enumerate()
            .map(|(pos, b)| Bus { id: pos, name: if b.name.is_empty() { b.id.to_string() } else { b.name } })
            .collect();
        let case = GridCase { buses, lines, conventional_units, vres_units, loads, voll, reference_bus };
        case.validate()?;
        Ok(case)
    }

    pub fn num_buses(&self) -> usize {
        self.buses.len()
    }

    /// Checks every structural invariant. Returns soft findings (such as an
    /// up-regulation price below the day-ahead price) as warnings.
    pub fn validate(&self) -> Result<Vec<Warning>, Error> {
        let n = self.buses.len();
        let bad = |msg: String| Err(Error::Validation(msg));
        if n == 0 {
            return bad("case has no buses".into());
        }
        for (pos, b) in self.buses.iter().enumerate() {
            if b.id != pos {
                return bad(format!("bus ids must be contiguous from 0, found {} at position {pos}", b.id));
            }
        }
        if self.reference_bus >= n {
            return bad(format!("reference bus {} does not exist", self.reference_bus));
        }
        if !(self.voll.is_finite() && self.voll > 0.0) {
            return bad(format!("voll must be positive, got {}", self.voll));
        }
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        for (i, l) in self.lines.iter().enumerate() {
            if l.from_bus >= n || l.to_bus >= n {
                return bad(format!("line {i} references unknown bus"));
            }
            if l.from_bus == l.to_bus {
                return bad(format!("line {i} connects bus {} to itself", l.from_bus));
            }
            if !(l.reactance_pu.is_finite() && l.reactance_pu > 0.0) {
                return bad(format!("line {i} has nonpositive reactance {}", l.reactance_pu));
            }
            if !finite_nonneg(l.capacity_mw) {
                return bad(format!("line {i} has invalid capacity {}", l.capacity_mw));
            }
        }
        let mut warnings = Vec::new();
        for (i, u) in self.conventional_units.iter().enumerate() {
            if u.bus >= n {
                return bad(format!("conventional unit {i} references unknown bus {}", u.bus));
            }
            if !(finite_nonneg(u.p_min) && finite_nonneg(u.p_max) && u.p_min <= u.p_max) {
                return bad(format!("conventional unit {i} needs 0 <= p_min <= p_max, got [{}, {}]", u.p_min, u.p_max));
            }
            if !(u.cost_da.is_finite() && u.cost_up.is_finite() && u.cost_down.is_finite()) {
                return bad(format!("conventional unit {i} has non-finite costs"));
            }
            if u.cost_up < u.cost_da {
                warnings.push(Warning(format!("conventional unit {i}: cost_up {} below cost_da {}", u.cost_up, u.cost_da)));
            }
            if u.cost_down > u.cost_da {
                warnings.push(Warning(format!("conventional unit {i}: cost_down {} above cost_da {}", u.cost_down, u.cost_da)));
            }
        }
        for (k, v) in self.vres_units.iter().enumerate() {
            if v.bus >= n {
                return bad(format!("vres unit {k} references unknown bus {}", v.bus));
            }
            if !finite_nonneg(v.capacity_mw) {
                return bad(format!("vres unit {k} has invalid capacity {}", v.capacity_mw));
            }
        }
        for (i, l) in self.loads.iter().enumerate() {
            if l.bus >= n {
                return bad(format!("load {i} references unknown bus {}", l.bus));
            }
            if !finite_nonneg(l.demand_mw) {
                return bad(format!("load {i} has invalid demand {}", l.demand_mw));
            }
        }
        // A single reference angle only pins one connected component.
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for l in &self.lines {
            let (a, b) = (find(&mut parent, l.from_bus), find(&mut parent, l.to_bus));
            parent[a] = b;
        }
        let root = find(&mut parent, 0);
        if (1..n).any(|b| find(&mut parent, b) != root) {
            return bad("network is disconnected; only one reference bus can be designated".into());
        }
        Ok(warnings)
    }

    /// Total demand per bus (several loads at one bus are summed).
    pub fn bus_demand(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.buses.len()];
        for l in &self.loads {
            d[l.bus] += l.demand_mw;
        }
        d
    }

    pub fn total_demand(&self) -> f64 {
        self.loads.iter().map(|l| l.demand_mw).sum()
    }

    pub fn vres_capacities(&self) -> Vec<f64> {
        self.vres_units.iter().map(|v| v.capacity_mw).collect()
    }

    /// Multiplies renewable capacities by `vres_scale` and line capacities by `line_scale`.
    pub fn scale(&self, vres_scale: f64, line_scale: f64) -> Result<GridCase, Error> {
        scale_case(self, vres_scale, line_scale)
    }
}

pub fn scale_case(case: &GridCase, vres_scale: f64, line_scale: f64) -> Result<GridCase, Error> {
    if !(vres_scale.is_finite() && vres_scale > 0.0 && line_scale.is_finite() && line_scale > 0.0) {
        return Err(Error::Config(format!("scales must be positive, got vres {vres_scale}, line {line_scale}")));
    }
    let mut out = case.clone();
    for v in &mut out.vres_units {
        v.capacity_mw *= vres_scale;
    }
    for l in &mut out.lines {
        l.capacity_mw *= line_scale;
    }
    Ok(out)
}

/// Expected renewable energy divided by total demand.
pub fn penetration_level(case: &GridCase, scenarios: &ScenarioSet) -> Result<f64, Error> {
    scenarios.check_against(case)?;
    let demand = case.total_demand();
    if demand <= 0.0 {
        return Err(Error::Validation("total demand is zero".into()));
    }
    Ok(scenarios.expected().iter().sum::<f64>() / demand)
}

/// Discrete renewable production scenarios, `realizations[scenario][unit]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub weights: Vec<f64>,
    pub realizations: Vec<Vec<f64>>,
}

impl ScenarioSet {
    pub fn new(weights: Vec<f64>, realizations: Vec<Vec<f64>>) -> Result<ScenarioSet, Error> {
        let s = ScenarioSet { weights, realizations };
        s.validate()?;
        Ok(s)
    }

    /// Equally likely scenarios.
    pub fn uniform(realizations: Vec<Vec<f64>>) -> Result<ScenarioSet, Error> {
        let n = realizations.len();
        ScenarioSet::new(vec![1.0 / n.max(1) as f64; n], realizations)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn num_units(&self) -> usize {
        self.realizations.first().map_or(0, |r| r.len())
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.weights.is_empty() {
            return Err(Error::Validation("scenario set is empty".into()));
        }
        if self.weights.len() != self.realizations.len() {
            return Err(Error::Dimension(format!(
                "{} weights for {} scenarios",
                self.weights.len(),
                self.realizations.len()
            )));
        }
        let k = self.num_units();
        let mut total = 0.0;
        for (w, r) in self.weights.iter().zip(&self.realizations) {
            if !(w.is_finite() && *w >= 0.0) {
                return Err(Error::Validation(format!("scenario weight {w} is negative or non-finite")));
            }
            if r.len() != k {
                return Err(Error::Dimension(format!("scenario rows have {} and {} units", k, r.len())));
            }
            if r.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Validation("scenario realizations must be nonnegative".into()));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("scenario weights sum to {total}, not 1")));
        }
        Ok(())
    }

    /// Checks dimensions and `0 <= W~ <= capacity` against a case.
    pub fn check_against(&self, case: &GridCase) -> Result<(), Error> {
        self.validate()?;
        let k = case.vres_units.len();
        if self.num_units() != k && !(k == 0 && self.realizations.iter().all(|r| r.is_empty())) {
            return Err(Error::Dimension(format!("scenarios cover {} units, case has {k}", self.num_units())));
        }
        for (s, r) in self.realizations.iter().enumerate() {
            for (u, (&v, unit)) in r.iter().zip(&case.vres_units).enumerate() {
                if v > unit.capacity_mw * (1.0 + 1e-12) + 1e-12 {
                    return Err(Error::Validation(format!(
                        "scenario {s} unit {u}: realization {v} exceeds capacity {}",
                        unit.capacity_mw
                    )));
                }
            }
        }
        Ok(())
    }

    /// Probability-weighted mean realization per unit.
    pub fn expected(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.num_units()];
        for (w, r) in self.weights.iter().zip(&self.realizations) {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += w * v;
            }
        }
        mean
    }

    /// Multiplies every realization by `factor` (pairs with [`scale_case`]).
    pub fn scaled(&self, factor: f64) -> ScenarioSet {
        ScenarioSet {
            weights: self.weights.clone(),
            realizations: self.realizations.iter().map(|r| r.iter().map(|v| v * factor).collect()).collect(),
        }
    }
}

/// Day-ahead renewable quantity offers, one per unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfferVector {
    pub w: Vec<f64>,
}

impl OfferVector {
    pub fn new(w: Vec<f64>) -> Self {
        OfferVector { w }
    }

    pub fn zeros(k: usize) -> Self {
        OfferVector { w: vec![0.0; k] }
    }

    pub fn total(&self) -> f64 {
        self.w.iter().sum()
    }

    pub fn check_against(&self, case: &GridCase) -> Result<(), Error> {
        if self.w.len() != case.vres_units.len() {
            return Err(Error::Dimension(format!("offer has {} entries, case has {} vres units", self.w.len(), case.vres_units.len())));
        }
        for (k, (&w, unit)) in self.w.iter().zip(&case.vres_units).enumerate() {
            if !(w.is_finite() && w >= 0.0 && w <= unit.capacity_mw * (1.0 + 1e-12) + 1e-12) {
                return Err(Error::Validation(format!("offer {w} for vres unit {k} outside [0, {}]", unit.capacity_mw)));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn one_bus() -> GridCase {
        GridCase {
            buses: vec![Bus { id: 0, name: "b0".into() }],
            lines: vec![],
            conventional_units: vec![ConventionalUnit { bus: 0, cost_da: 10.0, cost_up: 20.0, cost_down: 5.0, p_max: 200.0, p_min: 0.0 }],
            vres_units: vec![VresUnit { bus: 0, capacity_mw: 100.0 }],
            loads: vec![LoadPoint { bus: 0, demand_mw: 100.0 }],
            voll: 1000.0,
            reference_bus: 0,
        }
    }

    #[test]
    fn labeled_buses_are_renumbered() {
        let case = GridCase::from_labeled(
            vec![Bus { id: 7, name: String::new() }, Bus { id: 3, name: "x".into() }],
            vec![Line { from_bus: 7, to_bus: 3, reactance_pu: 0.1, capacity_mw: 10.0 }],
            vec![],
            vec![VresUnit { bus: 7, capacity_mw: 5.0 }],
            vec![LoadPoint { bus: 3, demand_mw: 1.0 }],
            500.0,
            None,
        )
        .unwrap();
        assert_eq!(case.buses[0].name, "x");
        assert_eq!(case.buses[1].name, "7");
        assert_eq!((case.lines[0].from_bus, case.lines[0].to_bus), (1, 0));
        assert_eq!(case.vres_units[0].bus, 1);
        assert_eq!(case.reference_bus, 0);
    }

    #[test]
    fn dangling_reference_is_rejected() {
        let err = GridCase::from_labeled(
            vec![Bus { id: 1, name: String::new() }],
            vec![],
            vec![],
            vec![],
            vec![LoadPoint { bus: 999, demand_mw: 1.0 }],
            500.0,
            None,
        );
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn validation_catches_bad_lines_and_islands() {
        let mut c = one_bus();
        c.buses.push(Bus { id: 1, name: String::new() });
        assert!(c.validate().is_err(), "island accepted");
        c.lines.push(Line { from_bus: 0, to_bus: 1, reactance_pu: 0.0, capacity_mw: 1.0 });
        assert!(c.validate().is_err(), "zero reactance accepted");
        c.lines[0].reactance_pu = 0.2;
        assert!(c.validate().unwrap().is_empty());
    }

    #[test]
    fn cheap_up_regulation_is_only_a_warning() {
        let mut c = one_bus();
        c.conventional_units[0].cost_up = 8.0;
        assert_eq!(c.validate().unwrap().len(), 1);
    }

    #[test]
    fn scaling_and_penetration() {
        let c = one_bus();
        assert_eq!(scale_case(&c, 1.0, 1.0).unwrap(), c);
        let s = scale_case(&c, 2.0, 1.0).unwrap();
        assert_eq!(s.vres_units[0].capacity_mw, 200.0);
        let sc = ScenarioSet::uniform(vec![vec![70.0]]).unwrap();
        assert!((penetration_level(&c, &sc).unwrap() - 0.7).abs() < 1e-12);
        let mut none = c.clone();
        none.vres_units.clear();
        let empty = ScenarioSet::uniform(vec![vec![]]).unwrap();
        assert_eq!(penetration_level(&none, &empty).unwrap(), 0.0);
        assert!(scale_case(&c, 0.0, 1.0).is_err());
    }

    #[test]
    fn scenario_weights_must_sum_to_one() {
        assert!(ScenarioSet::new(vec![0.5, 0.4], vec![vec![1.0], vec![2.0]]).is_err());
        let s = ScenarioSet::new(vec![0.25, 0.75], vec![vec![40.0], vec![80.0]]).unwrap();
        assert_eq!(s.expected(), vec![70.0]);
    }
}

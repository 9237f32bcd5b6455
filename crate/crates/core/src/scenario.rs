//! Node geometry, obstacles and geometric LOS/NLOS determination.

use serde::{Deserialize, Serialize};

use crate::antenna::Antenna;
use crate::math::Vec3;
use crate::{Error, Result};

pub type NodeId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Role {
    Gnb,
    Ue,
    Relay,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub role: Role,
    /// Position in metres.
    pub position: Vec3,
    pub antenna: Antenna,
    /// Transmit power in dBm; meaningful for the gNB only.
    pub tx_power_dbm: f64,
}

/// Axis-aligned box with a penetration loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub min: Vec3,
    pub max: Vec3,
    pub penetration_loss_db: f64,
}

impl Obstacle {
    pub fn new(min: Vec3, max: Vec3, penetration_loss_db: f64) -> Result<Self> {
        let o = Self {
            min,
            max,
            penetration_loss_db,
        };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<()> {
        for axis in 0..3 {
            if self.min.component(axis) > self.max.component(axis) {
                return Err(Error::config("obstacles.box_min", "box_min exceeds box_max"));
            }
        }
        if !(self.penetration_loss_db >= 0.0) {
            return Err(Error::config("obstacles.loss_db", "loss must be >= 0"));
        }
        Ok(())
    }

    /// Whether the closed segment `a -> b` touches the closed box.
    ///
    /// Slab test; touching a face or an edge counts as intersecting.
    pub fn intersects_segment(&self, a: Vec3, b: Vec3) -> bool {
        let d = b - a;
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for axis in 0..3 {
            let (o, dir) = (a.component(axis), d.component(axis));
            let (lo, hi) = (self.min.component(axis), self.max.component(axis));
            if dir == 0.0 {
                if o < lo || o > hi {
                    return false;
                }
                continue;
            }
            let (mut ta, mut tb) = ((lo - o) / dir, (hi - o) / dir);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LosState {
    Los,
    Nlos(Vec<Obstacle>),
}

impl LosState {
    pub fn is_los(&self) -> bool {
        matches!(self, LosState::Los)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub nodes: Vec<Node>,
    pub obstacles: Vec<Obstacle>,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(0.5e9..=100e9).contains(&self.carrier_hz) {
            return Err(Error::config(
                "carrier_hz",
                "carrier must lie in [0.5, 100] GHz",
            ));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::config("bandwidth_hz", "bandwidth must be > 0"));
        }
        let count = |r: Role| self.nodes.iter().filter(|n| n.role == r).count();
        if count(Role::Gnb) != 1 {
            return Err(Error::config("nodes", "exactly one GNB node is required"));
        }
        if count(Role::Relay) > 1 {
            return Err(Error::config("nodes", "at most one RELAY node is allowed"));
        }
        if count(Role::Ue) == 0 {
            return Err(Error::config("nodes", "at least one UE node is required"));
        }
        let mut ids: Vec<NodeId> = self.nodes.iter().map(|n| n.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("nodes.id", "node ids must be unique"));
        }
        for n in &self.nodes {
            if !n.position.is_finite() {
                return Err(Error::config(format!("nodes[{}].pos", n.id), "position must be finite"));
            }
            if n.role == Role::Gnb && !(0.0..=50.0).contains(&n.tx_power_dbm) {
                return Err(Error::config(
                    format!("nodes[{}].tx_power_dbm", n.id),
                    "tx power must lie in [0, 50] dBm",
                ));
            }
            n.antenna.geometry.validate()?;
            n.antenna.pattern.validate()?;
        }
        for o in &self.obstacles {
            o.validate()?;
        }
        Ok(())
    }

    pub fn gnb(&self) -> &Node {
        self.nodes
            .iter()
            .find(|n| n.role == Role::Gnb)
            .expect("validated scenario has a gNB")
    }

    pub fn relay(&self) -> Option<&Node> {
        self.nodes.iter().find(|n| n.role == Role::Relay)
    }

    /// UEs in ascending id order.
    pub fn ues(&self) -> Vec<&Node> {
        let mut ues: Vec<&Node> = self.nodes.iter().filter(|n| n.role == Role::Ue).collect();
        ues.sort_by_key(|n| n.id);
        ues
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn wavelength(&self) -> f64 {
        crate::SPEED_OF_LIGHT / self.carrier_hz
    }
}

/// Geometric LOS test between two nodes: NLOS iff the straight segment
/// touches at least one obstacle.
pub fn los_state(scenario: &Scenario, a: &Node, b: &Node) -> LosState {
    debug_assert_ne!(a.id, b.id, "los_state needs two distinct nodes");
    los_between(&scenario.obstacles, a.position, b.position)
}

pub fn los_between(obstacles: &[Obstacle], a: Vec3, b: Vec3) -> LosState {
    let blockers: Vec<Obstacle> = obstacles
        .iter()
        .filter(|o| o.intersects_segment(a, b))
        .cloned()
        .collect();
    if blockers.is_empty() {
        LosState::Los
    } else {
        LosState::Nlos(blockers)
    }
}

pub fn blockage_loss_db(state: &LosState) -> f64 {
    match state {
        LosState::Los => 0.0,
        LosState::Nlos(blockers) => blockers.iter().map(|o| o.penetration_loss_db).sum(),
    }
}

pub fn distance_3d(a: &Node, b: &Node) -> f64 {
    (a.position - b.position).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::antenna::{ArrayGeometry, ElementPattern};

    fn node(id: NodeId, role: Role, p: [f64; 3]) -> Node {
        Node {
            id,
            role,
            position: p.into(),
            antenna: Antenna::new(ArrayGeometry::new(1, 1).unwrap(), ElementPattern::isotropic()),
            tx_power_dbm: 33.0,
        }
    }

    fn building() -> Obstacle {
        Obstacle::new(Vec3::new(10.0, 10.0, 0.0), Vec3::new(20.0, 20.0, 20.0), 40.0).unwrap()
    }

    fn scen(obstacles: Vec<Obstacle>) -> Scenario {
        Scenario {
            name: "t".into(),
            nodes: vec![
                node(0, Role::Gnb, [0.0, 0.0, 10.0]),
                node(1, Role::Ue, [30.0, 30.0, 1.5]),
            ],
            obstacles,
            carrier_hz: 28e9,
            bandwidth_hz: 100e6,
        }
    }

    #[test]
    fn blocked_segment_is_nlos_with_one_blocker() {
        let s = scen(vec![building()]);
        let st = los_state(&s, &s.nodes[0], &s.nodes[1]);
        match &st {
            LosState::Nlos(b) => assert_eq!(b.len(), 1),
            LosState::Los => panic!("expected NLOS"),
        }
        assert_eq!(blockage_loss_db(&st), 40.0);
    }

    #[test]
    fn empty_obstacle_list_is_los() {
        let s = scen(vec![]);
        assert!(los_state(&s, &s.nodes[0], &s.nodes[1]).is_los());
        assert_eq!(blockage_loss_db(&LosState::Los), 0.0);
    }

    #[test]
    fn two_blockers_add_in_db() {
        let st = LosState::Nlos(vec![building(), building()]);
        assert_eq!(blockage_loss_db(&st), 80.0);
    }

    #[test]
    fn grazing_a_face_counts_as_blocked() {
        let o = building();
        // runs exactly along the y = 10 face
        assert!(o.intersects_segment(Vec3::new(0.0, 10.0, 5.0), Vec3::new(30.0, 10.0, 5.0)));
        // touches only the corner edge
        assert!(o.intersects_segment(Vec3::new(0.0, 0.0, 5.0), Vec3::new(20.0, 20.0, 5.0)));
        // just outside
        assert!(!o.intersects_segment(Vec3::new(0.0, 9.999, 5.0), Vec3::new(30.0, 9.999, 5.0)));
    }

    #[test]
    fn segment_box_test_agrees_with_dense_sampling() {
        // brute-force oracle: sample the segment at 10^4 points
        let o = building();
        let inside = |p: Vec3| {
            (0..3).all(|a| p.component(a) >= o.min.component(a) && p.component(a) <= o.max.component(a))
        };
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 30.0
        };
        let mut disagreements = 0;
        for _ in 0..300 {
            let a = Vec3::new(next(), next(), next() * 0.7);
            let b = Vec3::new(next(), next(), next() * 0.7);
            let sampled = (0..=10_000).any(|i| {
                let t = i as f64 / 10_000.0;
                inside(a + (b - a).scale(t))
            });
            let analytic = o.intersects_segment(a, b);
            // sampling can only miss slivers, never invent intersections
            if sampled {
                assert!(analytic);
            }
            if sampled != analytic {
                disagreements += 1;
            }
        }
        assert!(disagreements <= 3, "{disagreements} disagreements");
    }

    #[test]
    fn distance_examples() {
        let a = node(0, Role::Gnb, [0.0, 0.0, 0.0]);
        let b = node(1, Role::Ue, [3.0, 4.0, 0.0]);
        assert_eq!(distance_3d(&a, &a), 0.0);
        assert_eq!(distance_3d(&a, &b), 5.0);
    }

    #[test]
    fn validation_rejects_bad_scenarios() {
        let mut s = scen(vec![]);
        assert!(s.validate().is_ok());
        s.carrier_hz = 200e9;
        assert!(s.validate().is_err());
        let mut s = scen(vec![]);
        s.nodes[0].tx_power_dbm = 60.0;
        assert!(s.validate().is_err());
        let mut s = scen(vec![]);
        s.nodes.push(node(2, Role::Gnb, [1.0, 1.0, 1.0]));
        assert!(s.validate().is_err());
        assert!(Obstacle::new(Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 1.0), 1.0).is_err());
    }
}

//! Interconnected systems: parallel composition, feedback coupling through a
//! positive semidefinite matrix `S`, Gramian partitioning, and the
//! interconnected balanced truncation methods (ISBT and PIBT).
//!
//! Subsystems `Σⱼ` are stacked into `Σ_b` and closed with
//! `v_b = −S z_b + 𝓑 u_c`, `y_c = 𝓑ᵀ z_b`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::balancing::{self, BalancingWarning, Method};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::lti::{mat_to_rows, rows_to_mat, StateSpace};
use crate::lyapunov::{controllability_gramian, observability_gramian};
use crate::passivity::{self, PassivityCertificate};

/// Ordered list of square subsystems.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemSet {
    subsystems: Vec<StateSpace>,
}

impl SubsystemSet {
    pub fn new(subsystems: Vec<StateSpace>) -> Result<Self> {
        if subsystems.is_empty() {
            return Err(Error::InvalidArgument("empty subsystem set".into()));
        }
        for (j, s) in subsystems.iter().enumerate() {
            s.require_square().map_err(|e| e.in_subsystem(j))?;
        }
        Ok(Self { subsystems })
    }

    pub fn subsystems(&self) -> &[StateSpace] {
        &self.subsystems
    }

    pub fn len(&self) -> usize {
        self.subsystems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsystems.is_empty()
    }

    pub fn orders(&self) -> Vec<usize> {
        self.subsystems.iter().map(StateSpace::order).collect()
    }

    pub fn channels(&self) -> Vec<usize> {
        self.subsystems.iter().map(StateSpace::inputs).collect()
    }

    /// `n_b = Σ nⱼ`.
    pub fn total_order(&self) -> usize {
        self.orders().iter().sum()
    }

    /// `p_b = Σ pⱼ`.
    pub fn total_channels(&self) -> usize {
        self.channels().iter().sum()
    }
}

/// Coupling matrix `S` (`p_b × p_b`, symmetric PSD) and external map `𝓑`
/// (`p_b × p_c`).
#[derive(Debug, Clone, PartialEq)]
pub struct InterconnectionTopology {
    s: Mat,
    bcal: Mat,
}

impl InterconnectionTopology {
    pub fn new(s: Mat, bcal: Mat) -> Result<Self> {
        let pb = s.nrows();
        if s.ncols() != pb || bcal.nrows() != pb {
            return Err(Error::Dimension(format!(
                "S is {:?}, Bcal is {:?}",
                s.shape(),
                bcal.shape()
            )));
        }
        if !linalg::is_finite(&s) || !linalg::is_finite(&bcal) {
            return Err(Error::NonFinite("topology"));
        }
        let scale = s.norm();
        if (&s - s.transpose()).amax() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidArgument(
                "coupling matrix S is not symmetric".into(),
            ));
        }
        let s = linalg::symmetrize(&s);
        if pb > 0 {
            let lmin = linalg::lambda_min(&s);
            if lmin < -1e-10 * scale {
                return Err(Error::NotPositiveDefinite {
                    what: "coupling matrix S (must be positive semidefinite)",
                    lambda_min: lmin,
                    lambda_max: linalg::lambda_max(&s),
                });
            }
        }
        Ok(Self { s, bcal })
    }

    pub fn s(&self) -> &Mat {
        &self.s
    }

    pub fn bcal(&self) -> &Mat {
        &self.bcal
    }

    pub fn channels(&self) -> usize {
        self.s.nrows()
    }

    pub fn external_channels(&self) -> usize {
        self.bcal.ncols()
    }

    /// Open-loop topology with `S = 0`, `𝓑 = I`.
    pub fn open(pb: usize) -> Self {
        Self {
            s: Mat::zeros(pb, pb),
            bcal: Mat::identity(pb, pb),
        }
    }
}

/// A symmetric matrix viewed through a state partition.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedGramian {
    pub full: Mat,
    pub orders: Vec<usize>,
    offsets: Vec<usize>,
}

impl PartitionedGramian {
    pub fn block(&self, i: usize, j: usize) -> Mat {
        self.full
            .view(
                (self.offsets[i], self.offsets[j]),
                (self.orders[i], self.orders[j]),
            )
            .into_owned()
    }

    pub fn num_blocks(&self) -> usize {
        self.orders.len()
    }
}

pub fn partition_gramian(x: &Mat, orders: &[usize]) -> Result<PartitionedGramian> {
    let total: usize = orders.iter().sum();
    if x.shape() != (total, total) {
        return Err(Error::Dimension(format!(
            "matrix is {:?} but the orders {orders:?} sum to {total}",
            x.shape()
        )));
    }
    let mut offsets = Vec::with_capacity(orders.len());
    let mut acc = 0;
    for &n in orders {
        offsets.push(acc);
        acc += n;
    }
    Ok(PartitionedGramian {
        full: x.clone(),
        orders: orders.to_vec(),
        offsets,
    })
}

/// Block-diagonal stacking `Σ_b`.
pub fn parallel_compose(set: &SubsystemSet) -> StateSpace {
    let pick = |f: fn(&StateSpace) -> &Mat| -> Mat {
        let mats: Vec<&Mat> = set.subsystems.iter().map(f).collect();
        linalg::block_diag(&mats)
    };
    StateSpace::new(
        pick(StateSpace::a),
        pick(StateSpace::b),
        pick(StateSpace::c),
        pick(StateSpace::d),
    )
    .expect("block-diagonal stacking of valid subsystems is valid")
}

/// Closed loop `Σ_c`:
///
/// ```text
/// A_c = A_b − B_b 𝒟₂ S C_b        B_c = B_b 𝒟₂ 𝓑
/// C_c = 𝓑ᵀ 𝒟₁ C_b                D_c = 𝓑ᵀ D_b 𝒟₂ 𝓑
/// ```
///
/// with `𝒟₁ = (I + D_b S)⁻¹`, `𝒟₂ = (I + S D_b)⁻¹`.
pub fn couple(sb: &StateSpace, topo: &InterconnectionTopology) -> Result<StateSpace> {
    let pb = topo.channels();
    if !sb.is_square() || sb.inputs() != pb {
        return Err(Error::Dimension(format!(
            "stacked system has {} inputs and {} outputs, topology expects {pb}",
            sb.inputs(),
            sb.outputs()
        )));
    }
    let (a, b, c, d) = (sb.a(), sb.b(), sb.c(), sb.d());
    let s = topo.s();
    let eye = Mat::identity(pb, pb);
    let d1 = linalg::solve(&(&eye + d * s), &eye, "I + D_b S")?;
    let d2 = linalg::solve(&(&eye + s * d), &eye, "I + S D_b")?;
    let bc = topo.bcal();
    StateSpace::new(
        a - b * &d2 * s * c,
        b * &d2 * bc,
        bc.transpose() * &d1 * c,
        bc.transpose() * d * &d2 * bc,
    )
}

/// Reduced subsystems and the re-coupled reduced system.
#[derive(Debug, Clone)]
pub struct InterconnectedReduction {
    pub method: Method,
    pub variant: Option<PibtVariant>,
    pub reduced: Vec<balancing::ReductionResult>,
    pub coupled: StateSpace,
    /// Per-subsystem certificates followed by the certificate of the coupled
    /// reduced system (PIBT only).
    pub certificates: Vec<PassivityCertificate>,
    pub warnings: Vec<BalancingWarning>,
}

impl InterconnectedReduction {
    pub fn subsystems(&self) -> Result<SubsystemSet> {
        SubsystemSet::new(self.reduced.iter().map(|r| r.reduced.clone()).collect())
    }

    pub fn coupled_certificate(&self) -> Option<&PassivityCertificate> {
        self.certificates.last()
    }
}

fn check_orders(set: &SubsystemSet, orders: &[usize]) -> Result<()> {
    if orders.len() != set.len() {
        return Err(Error::InvalidArgument(format!(
            "{} orders given for {} subsystems",
            orders.len(),
            set.len()
        )));
    }
    for (j, (&r, n)) in orders.iter().zip(set.orders()).enumerate() {
        if r < 1 || r > n {
            return Err(
                Error::InvalidArgument(format!("order {r} outside 1..={n}")).in_subsystem(j)
            );
        }
    }
    Ok(())
}

fn check_topology(set: &SubsystemSet, topo: &InterconnectionTopology) -> Result<()> {
    if topo.channels() != set.total_channels() {
        return Err(Error::Dimension(format!(
            "topology has {} coupling channels, subsystems provide {}",
            topo.channels(),
            set.total_channels()
        )));
    }
    Ok(())
}

fn recouple(
    reduced: &[balancing::ReductionResult],
    topo: &InterconnectionTopology,
) -> Result<StateSpace> {
    let set = SubsystemSet::new(reduced.iter().map(|r| r.reduced.clone()).collect())?;
    couple(&parallel_compose(&set), topo)
}

/// MGBT applied to each `Σⱼ` in isolation (the interconnection is ignored
/// during reduction), followed by re-coupling.
pub fn reduce_mgbt(
    set: &SubsystemSet,
    topo: &InterconnectionTopology,
    orders: &[usize],
    variant: balancing::MgVariant,
) -> Result<InterconnectedReduction> {
    check_orders(set, orders)?;
    check_topology(set, topo)?;
    let mut reduced = Vec::with_capacity(set.len());
    let mut warnings = Vec::new();
    for (j, sys) in set.subsystems().iter().enumerate() {
        let res =
            balancing::reduce_mg_bt(sys, orders[j], variant).map_err(|e| e.in_subsystem(j))?;
        warnings.extend(res.warnings.iter().cloned());
        reduced.push(res);
    }
    let coupled = recouple(&reduced, topo)?;
    Ok(InterconnectedReduction {
        method: Method::MGBT,
        variant: None,
        reduced,
        coupled,
        certificates: Vec::new(),
        warnings,
    })
}

/// ISBT: balance each `Σⱼ` with the diagonal blocks `(P_{j,j}, Q_{j,j})` of
/// the coupled Gramians.
pub fn reduce_isbt(
    set: &SubsystemSet,
    topo: &InterconnectionTopology,
    orders: &[usize],
) -> Result<InterconnectedReduction> {
    check_orders(set, orders)?;
    check_topology(set, topo)?;
    let sc = couple(&parallel_compose(set), topo)?;
    sc.require_hurwitz()?;
    let pc = partition_gramian(&controllability_gramian(&sc)?.x, &set.orders())?;
    let qc = partition_gramian(&observability_gramian(&sc)?.x, &set.orders())?;
    let mut reduced = Vec::with_capacity(set.len());
    let mut warnings = Vec::new();
    for (j, sys) in set.subsystems().iter().enumerate() {
        let res = balancing::balance(sys, &pc.block(j, j), &qc.block(j, j))
            .and_then(|bal| balancing::truncate(&bal, orders[j], Method::ISBT))
            .map_err(|e| e.in_subsystem(j))?;
        warnings.extend(res.warnings.iter().cloned());
        reduced.push(res);
    }
    let coupled = recouple(&reduced, topo)?;
    Ok(InterconnectedReduction {
        method: Method::ISBT,
        variant: None,
        reduced,
        coupled,
        certificates: Vec::new(),
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PibtVariant {
    /// `(P_{j,j}, Ξⱼ)`.
    Primal,
    /// `(Πⱼ, Q_{j,j})`.
    Dual,
}

/// PIBT: balance `Σⱼ` with `(P_{j,j}, Ξ_min,j)` (or `(Π_min,j, Q_{j,j})`),
/// truncate, re-couple and certify every reduced model.
pub fn reduce_pibt(
    set: &SubsystemSet,
    topo: &InterconnectionTopology,
    orders: &[usize],
    variant: PibtVariant,
) -> Result<InterconnectedReduction> {
    check_orders(set, orders)?;
    check_topology(set, topo)?;
    let sc = couple(&parallel_compose(set), topo)?;
    sc.require_hurwitz()?;
    let global = match variant {
        PibtVariant::Primal => controllability_gramian(&sc)?.x,
        PibtVariant::Dual => observability_gramian(&sc)?.x,
    };
    let blocks = partition_gramian(&global, &set.orders())?;

    let mut reduced = Vec::with_capacity(set.len());
    let mut certificates = Vec::with_capacity(set.len() + 1);
    let mut warnings = Vec::new();
    for (j, sys) in set.subsystems().iter().enumerate() {
        let res = (|| {
            let (x_i, x_o) = match variant {
                PibtVariant::Primal => {
                    (blocks.block(j, j), passivity::min_available_storage(sys)?.x)
                }
                PibtVariant::Dual => (passivity::min_required_supply(sys)?.x, blocks.block(j, j)),
            };
            let bal = balancing::balance(sys, &x_i, &x_o)?;
            balancing::truncate(&bal, orders[j], Method::PIBT)
        })()
        .map_err(|e| e.in_subsystem(j))?;
        warnings.extend(res.warnings.iter().cloned());
        certificates.push(passivity::is_passive(&res.reduced).map_err(|e| e.in_subsystem(j))?);
        reduced.push(res);
    }
    let coupled = recouple(&reduced, topo)?;
    certificates.push(passivity::is_passive(&coupled)?);
    Ok(InterconnectedReduction {
        method: Method::PIBT,
        variant: Some(variant),
        reduced,
        coupled,
        certificates,
        warnings,
    })
}

/// Dispatches to the interconnected variants of MGBT (`(P, Ξ)` pair), ISBT
/// and PIBT (primal).
pub fn reduce_interconnected(
    method: Method,
    set: &SubsystemSet,
    topo: &InterconnectionTopology,
    orders: &[usize],
) -> Result<InterconnectedReduction> {
    match method {
        Method::MGBT => reduce_mgbt(set, topo, orders, balancing::MgVariant::PXi),
        Method::ISBT => reduce_isbt(set, topo, orders),
        Method::PIBT => reduce_pibt(set, topo, orders, PibtVariant::Primal),
        other => Err(Error::InvalidArgument(format!(
            "{other} reduces a single system; interconnected reduction supports MGBT, ISBT and PIBT"
        ))),
    }
}

/// Topology file: `{"S": .., "Bcal": .., "subsystems": [paths], "orders": [..]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[allow(non_snake_case)]
pub struct TopologyJson {
    pub S: Vec<Vec<f64>>,
    pub Bcal: Vec<Vec<f64>>,
    #[serde(default)]
    pub subsystems: Vec<String>,
    #[serde(default)]
    pub orders: Vec<usize>,
}

impl TopologyJson {
    pub fn topology(&self) -> Result<InterconnectionTopology> {
        let s = rows_to_mat(&self.S, None, None, "S")?;
        let bcal = rows_to_mat(&self.Bcal, Some(s.nrows()), None, "Bcal")?;
        InterconnectionTopology::new(s, bcal)
    }

    pub fn from_topology(
        topo: &InterconnectionTopology,
        subsystems: Vec<String>,
        orders: Vec<usize>,
    ) -> Self {
        Self {
            S: mat_to_rows(topo.s()),
            Bcal: mat_to_rows(topo.bcal()),
            subsystems,
            orders,
        }
    }

    /// Subsystem paths resolved against the directory of the topology file.
    pub fn subsystem_paths(&self, topology_file: &Path) -> Vec<PathBuf> {
        let base = topology_file.parent().unwrap_or_else(|| Path::new(""));
        self.subsystems.iter().map(|s| base.join(s)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar() -> StateSpace {
        StateSpace::from_rows(1, 1, 1, &[-1.0], &[1.0], &[1.0], &[0.0]).unwrap()
    }

    fn two_scalars() -> (SubsystemSet, InterconnectionTopology) {
        let set = SubsystemSet::new(vec![scalar(), scalar()]).unwrap();
        let s = Mat::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let bcal = Mat::from_row_slice(2, 1, &[0.0, 1.0]);
        (set, InterconnectionTopology::new(s, bcal).unwrap())
    }

    #[test]
    fn composition_and_open_loop() {
        let set = SubsystemSet::new(vec![scalar()]).unwrap();
        assert_eq!(parallel_compose(&set), scalar());
        let (set2, _) = two_scalars();
        let sb = parallel_compose(&set2);
        assert_eq!(sb.a(), &(-Mat::identity(2, 2)));
        assert_eq!(sb.b(), &Mat::identity(2, 2));
        assert_eq!(couple(&sb, &InterconnectionTopology::open(2)).unwrap(), sb);
    }

    #[test]
    fn two_scalar_coupling() {
        let (set, topo) = two_scalars();
        let sc = couple(&parallel_compose(&set), &topo).unwrap();
        assert_eq!(sc.a(), &Mat::from_row_slice(2, 2, &[-2.0, 1.0, 1.0, -2.0]));
        assert_eq!(sc.b(), &Mat::from_row_slice(2, 1, &[0.0, 1.0]));
        assert_eq!(sc.c(), &Mat::from_row_slice(1, 2, &[0.0, 1.0]));
        assert_eq!(sc.d(), &Mat::zeros(1, 1));
    }

    #[test]
    fn feedthrough_coupling_uses_inverses() {
        // Scalar static gains: y = d·v, v = −s·y + u  ⇒  y = d/(1+sd)·u.
        let g = StateSpace::gain(Mat::from_element(1, 1, 2.0));
        let set = SubsystemSet::new(vec![g]).unwrap();
        let topo = InterconnectionTopology::new(Mat::from_element(1, 1, 3.0), Mat::identity(1, 1))
            .unwrap();
        let sc = couple(&parallel_compose(&set), &topo).unwrap();
        assert_relative_eq!(sc.d()[(0, 0)], 2.0 / 7.0, epsilon = 1e-15);
        let singular =
            InterconnectionTopology::new(Mat::from_element(1, 1, 0.5), Mat::identity(1, 1))
                .unwrap();
        let neg = SubsystemSet::new(vec![StateSpace::gain(Mat::from_element(1, 1, -2.0))]).unwrap();
        assert!(matches!(
            couple(&parallel_compose(&neg), &singular),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn topology_validation() {
        assert!(InterconnectionTopology::new(
            Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            Mat::zeros(2, 1)
        )
        .is_err());
        assert!(matches!(
            InterconnectionTopology::new(-Mat::identity(2, 2), Mat::zeros(2, 1)),
            Err(Error::NotPositiveDefinite { .. })
        ));
        assert!(InterconnectionTopology::new(Mat::identity(2, 2), Mat::zeros(3, 1)).is_err());
    }

    #[test]
    fn partition_blocks() {
        let x = Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]);
        let p = partition_gramian(&x, &[1, 1]).unwrap();
        assert_eq!(p.block(0, 0)[(0, 0)], 1.0);
        assert_eq!(p.block(0, 1)[(0, 0)], 2.0);
        assert_eq!(p.block(1, 0)[(0, 0)], 2.0);
        assert_eq!(p.block(1, 1)[(0, 0)], 3.0);
        assert_eq!(partition_gramian(&x, &[2]).unwrap().block(0, 0), x);
        assert!(partition_gramian(&x, &[1, 2]).is_err());
    }

    #[test]
    fn full_order_methods_reproduce_coupled_response() {
        let (set, topo) = two_scalars();
        let sc = couple(&parallel_compose(&set), &topo).unwrap();
        let w = [0.1, 1.0, 10.0];
        let g = |s: &StateSpace| -> Vec<_> {
            s.frequency_response(&w)
                .into_iter()
                .map(|r| r.unwrap().g)
                .collect()
        };
        let reference = g(&sc);
        let isbt = reduce_isbt(&set, &topo, &[1, 1]).unwrap();
        let pibt = reduce_pibt(&set, &topo, &[1, 1], PibtVariant::Primal).unwrap();
        for red in [&isbt, &pibt] {
            for (a, b) in g(&red.coupled).iter().zip(&reference) {
                assert!((a - b).norm() < 1e-9);
            }
        }
        assert_eq!(pibt.certificates.len(), 3);
        assert!(pibt.certificates.iter().all(|c| c.feasible));
    }

    #[test]
    fn orders_are_checked() {
        let (set, topo) = two_scalars();
        let err = reduce_isbt(&set, &topo, &[1, 2]).unwrap_err();
        assert!(matches!(err, Error::Subsystem { index: 1, .. }));
        assert!(reduce_isbt(&set, &topo, &[1]).is_err());
    }

    #[test]
    fn topology_json_round_trip() {
        let (_, topo) = two_scalars();
        let j =
            TopologyJson::from_topology(&topo, vec!["a.json".into(), "b.json".into()], vec![1, 1]);
        let text = serde_json::to_string(&j).unwrap();
        let back: TopologyJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back.topology().unwrap(), topo);
        assert_eq!(
            back.subsystem_paths(Path::new("dir/topo.json"))[1],
            PathBuf::from("dir/b.json")
        );
    }
}

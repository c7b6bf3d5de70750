//! The verification suite: twelve numbered criteria covering fractal
//! generation, measure limits, coherence, seminorm laws, spectra, spectral
//! measures, the functional calculus, and the functional models. Each
//! criterion runs at its stated tolerance and within its stated time
//! budget; the suite is deterministic for a fixed seed.

use crate::hata::{
    self, build_inductive_system, check_connectivity, compose_word, enumerate_branches,
    generate_approximation, IfsParams, Segment, SystemVariant, Word,
};
use crate::linalg::C64;
use crate::measure::{ExtendedMeasure, SetExpr};
use crate::operator::{fuglede_putnam_check, CoherentOperator};
use crate::order::is_sequentially_finite;
use crate::spectral::{borel_calculus, functional_model, integrate, spectral_measure};
use crate::testkit;
use crate::tol;
use rand::Rng;
use std::time::Instant;

/// Outcome of one criterion run.
#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub millis: u128,
    pub budget_millis: u128,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        format!(
            "criterion {:2} {:<28} {} ({} ms, budget {} ms){}",
            self.id,
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.millis,
            self.budget_millis,
            if self.pass {
                String::new()
            } else {
                format!(" -- {}", self.detail)
            }
        )
    }

    pub fn within_budget(&self) -> bool {
        self.millis <= self.budget_millis
    }
}

pub const CRITERIA: [(usize, &str, u128); 12] = [
    (1, "branch counts", 1_000),
    (2, "recursion fidelity", 10_000),
    (3, "connectivity", 5_000),
    (4, "measure limits", 10_000),
    (5, "coherence equivalence", 20_000),
    (6, "seminorm laws", 10_000),
    (7, "spectrum union", 20_000),
    (8, "commutation transfer", 10_000),
    (9, "spectral measure laws", 30_000),
    (10, "functional calculus", 10_000),
    (11, "functional model round-trip", 60_000),
    (12, "representing certificates", 5_000),
];

/// Runs a single criterion by number (1 through 12).
pub fn run_criterion(id: usize, seed: u64) -> CriterionReport {
    let (_, name, budget) = CRITERIA
        .iter()
        .find(|(k, _, _)| *k == id)
        .copied()
        .expect("criterion ids run from 1 to 12");
    let start = Instant::now();
    let outcome = match id {
        1 => criterion_branch_counts(),
        2 => criterion_recursion_fidelity(seed),
        3 => criterion_connectivity(),
        4 => criterion_measure_limits(seed),
        5 => criterion_coherence_equivalence(seed),
        6 => criterion_seminorm_laws(seed),
        7 => criterion_spectrum_union(seed),
        8 => criterion_commutation_transfer(seed),
        9 => criterion_spectral_measure_laws(seed),
        10 => criterion_functional_calculus(seed),
        11 => criterion_functional_model(seed),
        12 => criterion_representing_certificates(),
        _ => unreachable!(),
    };
    let millis = start.elapsed().as_millis();
    match outcome {
        Ok(detail) => CriterionReport {
            id,
            name,
            pass: true,
            detail,
            millis,
            budget_millis: budget,
        },
        Err(detail) => CriterionReport {
            id,
            name,
            pass: false,
            detail,
            millis,
            budget_millis: budget,
        },
    }
}

/// Runs the whole suite in order.
pub fn run_all(seed: u64) -> Vec<CriterionReport> {
    CRITERIA
        .iter()
        .map(|(id, _, _)| run_criterion(*id, seed))
        .collect()
}

fn criterion_branch_counts() -> Result<String, String> {
    let p = IfsParams::default_figure();
    for (n, expected) in [(0usize, 2usize), (1, 3), (2, 5), (3, 9), (4, 17), (5, 33)] {
        let got = enumerate_branches(&p, n).len();
        if got != expected {
            return Err(format!("level {n}: {got} branches, expected {expected}"));
        }
    }
    for n in 6..=12usize {
        let got = enumerate_branches(&p, n).len();
        if got != (1usize << n) + 1 {
            return Err(format!(
                "level {n}: {got} branches, expected {}",
                (1usize << n) + 1
            ));
        }
    }
    Ok("levels 0..=12 exact".into())
}

fn criterion_recursion_fidelity(seed: u64) -> Result<String, String> {
    let p = IfsParams::default_figure();
    let mut levels = Vec::new();
    for n in 0..=11usize {
        levels.push(generate_approximation(&p, n));
    }
    for n in 0..=10usize {
        // image of the level under both maps equals the next level as a
        // segment multiset up to orientation
        let mut images: Vec<Segment> = Vec::new();
        for s in &levels[n].segments {
            images.push(s.image(1, &p));
        }
        for s in &levels[n].segments {
            images.push(s.image(2, &p));
        }
        let next = &levels[n + 1].segments;
        if images.len() != next.len() {
            return Err(format!("level {n}: segment count mismatch"));
        }
        let mut used = vec![false; next.len()];
        for img in &images {
            let hit = next
                .iter()
                .enumerate()
                .find(|(k, s)| !used[*k] && s.same_up_to_orientation(img, tol::ENDPOINT));
            match hit {
                Some((k, _)) => used[k] = true,
                None => return Err(format!("level {n}: unmatched image segment")),
            }
        }
        // pointwise inclusion of the level in the next
        for s in &levels[n].segments {
            for z in s.sample(5) {
                if levels[n + 1].distance_to(z) > tol::ENDPOINT {
                    return Err(format!("level {n}: sampled point escapes the next level"));
                }
            }
        }
    }
    // closed forms of all short words at random points
    let mut r = testkit::rng(seed);
    let q = p.c_norm_sq();
    let c = p.c();
    let rr = 1.0 - q;
    type Form = (C64, C64, bool);
    let forms: Vec<(&str, Form)> = vec![
        ("11", (C64::new(q, 0.0), C64::new(0.0, 0.0), false)),
        ("12", (c * rr, c * q, false)),
        ("21", (c.conj() * rr, C64::new(q, 0.0), false)),
        (
            "22",
            (C64::new(rr * rr, 0.0), C64::new(q * (2.0 - q), 0.0), false),
        ),
        ("111", (c * q, C64::new(0.0, 0.0), true)),
        ("112", (C64::new(q * rr, 0.0), C64::new(q * q, 0.0), true)),
        ("121", (c * c * rr, c * q, true)),
        ("122", (c * rr * rr, c * q * (2.0 - q), true)),
        ("211", (C64::new(q * rr, 0.0), C64::new(q, 0.0), true)),
        ("212", (c.conj() * rr * rr, c.conj() * q * rr + q, true)),
        ("221", (c * rr * rr, C64::new(q * (2.0 - q), 0.0), true)),
        (
            "222",
            (
                C64::new(rr * rr * rr, 0.0),
                C64::new(q * (3.0 - 3.0 * q + q * q), 0.0),
                true,
            ),
        ),
    ];
    for _ in 0..100 {
        let z = testkit::random_complex(&mut r) * 2.0;
        for (ws, (a, b, conj)) in &forms {
            let w = Word::parse(ws).unwrap();
            let got = compose_word(&w, z, &p);
            let expected = if *conj { a * z.conj() + b } else { a * z + b };
            if (got - expected).norm() > tol::WORD_CLOSED_FORM {
                return Err(format!("word {ws} at {z}: {got} vs {expected}"));
            }
        }
    }
    Ok("levels 0..=10 recursion + 12 closed forms at 100 points".into())
}

fn criterion_connectivity() -> Result<String, String> {
    let p = IfsParams::default_figure();
    for n in 0..=10usize {
        let cert = check_connectivity(&generate_approximation(&p, n))
            .map_err(|e| format!("level {n}: {e}"))?;
        if (cert.junction - p.c_norm_sq()).abs() > 1e-15 {
            return Err(format!("level {n}: junction {} off", cert.junction));
        }
    }
    Ok("levels 0..=10 connected with certified junction".into())
}

fn criterion_measure_limits(seed: u64) -> Result<String, String> {
    let p = IfsParams::default_figure();
    let systems = vec![
        (
            "linear",
            build_inductive_system(SystemVariant::Linear, &p, 4),
        ),
        (
            "branch-indexed",
            build_inductive_system(SystemVariant::BranchIndexed, &p, 4),
        ),
        (
            "branch-union",
            build_inductive_system(SystemVariant::BranchUnion, &p, 3),
        ),
    ];
    let mut r = testkit::rng(seed);
    for (label, built) in systems {
        let hs = built.map_err(|e| format!("{label}: {e}"))?;
        is_sequentially_finite(&hs.index, &hs.witness).map_err(|e| format!("{label}: {e}"))?;
        // extension property on ring sets: whole nodes and random members
        for el in hs.index.elements() {
            let expr = SetExpr::NodeSet(el.clone());
            let lm = hs
                .system
                .limit_measure(&expr)
                .map_err(|e| format!("{label}: {e}"))?;
            match hs
                .system
                .extended_measure(&expr)
                .map_err(|e| format!("{label}: {e}"))?
            {
                ExtendedMeasure::Finite(v) => {
                    if (v - lm).abs() > 1e-12 * (1.0 + lm.abs()) {
                        return Err(format!("{label}: extension mismatch at {el}"));
                    }
                }
                _ => return Err(format!("{label}: ring set diverged at {el}")),
            }
        }
        let top = hs.index.top().expect("finite directed index");
        let ids: Vec<String> = hs
            .system
            .node(&top)
            .map_err(|e| format!("{label}: {e}"))?
            .carrier
            .ids()
            .into_iter()
            .collect();
        for _ in 0..20 {
            let pick: Vec<String> = ids.iter().filter(|_| r.gen_bool(0.5)).cloned().collect();
            let expr = SetExpr::Members(pick.iter().cloned().collect());
            let lm = hs
                .system
                .limit_measure(&expr)
                .map_err(|e| format!("{label}: {e}"))?;
            match hs.system.extended_measure(&expr).unwrap() {
                ExtendedMeasure::Finite(v) => {
                    if (v - lm).abs() > 1e-12 * (1.0 + lm.abs()) {
                        return Err(format!("{label}: extension mismatch on random member set"));
                    }
                }
                _ => return Err(format!("{label}: member set diverged")),
            }
        }
    }
    // monotonicity on nested pairs over the linear system at depth 4
    let hs = build_inductive_system(SystemVariant::Linear, &p, 4).unwrap();
    let top = hs.index.top().unwrap();
    let ids: Vec<String> = hs
        .system
        .node(&top)
        .unwrap()
        .carrier
        .ids()
        .into_iter()
        .collect();
    for k in 0..200 {
        let small: Vec<String> = ids.iter().filter(|_| r.gen_bool(0.4)).cloned().collect();
        let extra: Vec<String> = ids.iter().filter(|_| r.gen_bool(0.4)).cloned().collect();
        let mut big = small.clone();
        big.extend(extra);
        let es = hs
            .system
            .extended_measure(&SetExpr::Members(small.iter().cloned().collect()))
            .unwrap();
        let eb = hs
            .system
            .extended_measure(&SetExpr::Members(big.iter().cloned().collect()))
            .unwrap();
        match (es, eb) {
            (ExtendedMeasure::Finite(a), ExtendedMeasure::Finite(b)) => {
                if a > b + 1e-12 {
                    return Err(format!("monotonicity violated at pair {k}"));
                }
            }
            _ => return Err("unexpected divergence".into()),
        }
    }
    // declared divergence with the derived ratio
    match hs
        .system
        .extended_measure(&SetExpr::Unbounded(Box::new(SetExpr::Full)))
        .unwrap()
    {
        ExtendedMeasure::Infinite { growth_ratio } => {
            if (growth_ratio - 1.25).abs() > 1e-12 {
                return Err(format!("growth ratio {growth_ratio}, expected 1.25"));
            }
        }
        _ => return Err("full set should diverge for the default parameters".into()),
    }
    Ok("three systems extend, 200 monotone pairs, ratio 1.25".into())
}

fn criterion_coherence_equivalence(seed: u64) -> Result<String, String> {
    let mut r = testkit::rng(seed);
    let mut coherent_pass = 0usize;
    let mut incoherent_caught = 0usize;
    for k in 0..100 {
        let sys = testkit::random_representing_system(&mut r, 6, 8);
        let t = testkit::random_coherent_net(&mut r, &sys, false);
        // both characterizations must accept the constructed net
        for (lo, hi) in sys.index().comparable_pairs() {
            let res = t.coherence_residuals(&lo, &hi).map_err(|e| e.to_string())?;
            let ok1 = res.direct <= tol::COHERENCE;
            let ok2 = res.block <= tol::COHERENCE;
            if ok1 != ok2 {
                return Err(format!("case {k}: verdicts disagree on coherent net"));
            }
            if !ok1 {
                return Err(format!("case {k}: constructed net rejected"));
            }
        }
        coherent_pass += 1;
        let broken = testkit::mutate_incoherent(&mut r, &t);
        let raw = CoherentOperator::from_blocks_unchecked(sys.clone(), sys.clone(), broken);
        let mut caught1 = false;
        let mut caught2 = false;
        for (lo, hi) in sys.index().comparable_pairs() {
            let res = raw
                .coherence_residuals(&lo, &hi)
                .map_err(|e| e.to_string())?;
            let bad1 = res.direct > tol::COHERENCE;
            let bad2 = res.block > tol::COHERENCE;
            if bad1 != bad2 {
                return Err(format!("case {k}: verdicts disagree on mutated net"));
            }
            caught1 |= bad1;
            caught2 |= bad2;
        }
        if !(caught1 && caught2) {
            return Err(format!("case {k}: mutation not detected"));
        }
        incoherent_caught += 1;
    }
    Ok(format!(
        "{coherent_pass} coherent accepted, {incoherent_caught} mutated rejected, verdicts agree"
    ))
}

fn criterion_seminorm_laws(seed: u64) -> Result<String, String> {
    let mut r = testkit::rng(seed);
    for k in 0..100 {
        let sys = testkit::random_representing_system(&mut r, 5, 8);
        let s = testkit::random_coherent_net(&mut r, &sys, false);
        let t = testkit::random_coherent_net(&mut r, &sys, false);
        for el in sys.index().elements() {
            let q = t.seminorm(el).map_err(|e| e.to_string())?;
            let q_star = t.adjoint().seminorm(el).map_err(|e| e.to_string())?;
            let q_tt = t
                .adjoint()
                .compose(&t)
                .unwrap()
                .seminorm(el)
                .map_err(|e| e.to_string())?;
            if (q_star - q).abs() > 1e-9 * (1.0 + q) {
                return Err(format!("case {k}: adjoint seminorm off at {el}"));
            }
            if (q_tt - q * q).abs() > 1e-9 * (1.0 + q * q) {
                return Err(format!("case {k}: star-square law off at {el}"));
            }
            let qs = s.seminorm(el).unwrap();
            let q_st = s.compose(&t).unwrap().seminorm(el).unwrap();
            if q_st > qs * q + 1e-9 * (1.0 + qs * q) {
                return Err(format!("case {k}: submultiplicativity off at {el}"));
            }
        }
    }
    Ok("100 nets satisfy the three seminorm laws".into())
}

fn criterion_spectrum_union(seed: u64) -> Result<String, String> {
    let mut r = testkit::rng(seed);
    for k in 0..100 {
        let sys = testkit::random_representing_system(&mut r, 5, 8);
        let n = testkit::random_coherent_net(&mut r, &sys, true);
        let spec = n.spectrum(tol::EIGEN_CLUSTER).map_err(|e| e.to_string())?;
        // union semantics: every blockwise eigenvalue is clustered in, and
        // every atom names a contributing node
        for el in sys.index().elements() {
            let eigs = crate::linalg::normal_eigen(n.block(el).unwrap(), 1e-8, 1e-8)
                .map_err(|res| format!("case {k}: block not normal ({res:.2e})"))?;
            for (v, _) in eigs {
                if !spec.contains(v, 1e-7) {
                    return Err(format!("case {k}: missing eigenvalue {v} of {el}"));
                }
            }
        }
        for atom in &spec.atoms {
            if atom.nodes.is_empty() {
                return Err(format!("case {k}: atom without contributing node"));
            }
            if n.resolvent_gap(atom.value) > 1e-8 {
                return Err(format!("case {k}: spectrum point has invertible blocks"));
            }
        }
        // off-spectrum probes keep all blocks invertible
        let mut probes = 0;
        let mut attempts = 0;
        while probes < 20 && attempts < 1000 {
            attempts += 1;
            let zp = testkit::random_complex(&mut r) * 4.0;
            let dist = spec
                .values()
                .iter()
                .map(|v| (*v - zp).norm())
                .fold(f64::INFINITY, f64::min);
            if dist > 1e-3 {
                probes += 1;
                if n.resolvent_gap(zp) <= 1e-9 {
                    return Err(format!("case {k}: off-spectrum probe hit a singular block"));
                }
            }
        }
        if probes < 20 {
            return Err(format!("case {k}: probe sampling starved"));
        }
    }
    Ok("100 nets: union semantics and 20 resolvent probes each".into())
}

fn criterion_commutation_transfer(seed: u64) -> Result<String, String> {
    let mut r = testkit::rng(seed);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let (n, m, b) = testkit::random_intertwining_triple(&mut r, 5, 8);
        let report = fuglede_putnam_check(&n, &m, &b, tol::FP_PRE, tol::FP_PASS)
            .map_err(|e| format!("case {k}: {e}"))?;
        if !report.pass {
            return Err(format!(
                "case {k}: adjoint residual {:.3e}",
                report.max_adjoint_residual
            ));
        }
        worst = worst.max(report.max_adjoint_residual);
    }
    Ok(format!(
        "100 triples pass, worst adjoint residual {worst:.2e}"
    ))
}

fn criterion_spectral_measure_laws(seed: u64) -> Result<String, String> {
    let mut r = testkit::rng(seed);
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let sys = testkit::random_representing_system(&mut r, 5, 8);
        let n = testkit::random_coherent_net(&mut r, &sys, true);
        let e = spectral_measure(&n).map_err(|err| format!("case {k}: {err}"))?;
        let report = e.laws_report(seed.wrapping_add(k));
        if report.max_residual() > tol::SPECTRAL_LAWS {
            return Err(format!(
                "case {k}: law residual {:.3e}",
                report.max_residual()
            ));
        }
        worst = worst.max(report.max_residual());
        let recon = integrate(|w| w, &e);
        let res = recon.sub(&n).unwrap().max_seminorm();
        if res > tol::SPECTRAL_LAWS {
            return Err(format!("case {k}: reconstruction residual {res:.3e}"));
        }
        let unit = integrate(|_| C64::new(1.0, 0.0), &e);
        let res = unit
            .sub(&CoherentOperator::identity_on(sys.clone()))
            .unwrap()
            .max_seminorm();
        if res > tol::SPECTRAL_LAWS {
            return Err(format!("case {k}: unit residual {res:.3e}"));
        }
        // commutant criterion in both directions
        let commuting = testkit::random_commuting_net(&mut r, &n);
        let rep = e.commutant_check(&commuting).unwrap();
        if rep.with_source > 1e-9 || rep.with_atoms > 1e-8 {
            return Err(format!("case {k}: commuting net flagged ({rep:?})"));
        }
        let generic = testkit::random_coherent_net(&mut r, &sys, false);
        let rep2 = e.commutant_check(&generic).unwrap();
        if rep2.with_source > 1e-6 && rep2.with_atoms <= 1e-8 {
            return Err(format!("case {k}: commutant criterion broke one direction"));
        }
    }
    Ok(format!(
        "50 measures obey the laws, worst residual {worst:.2e}"
    ))
}

fn criterion_functional_calculus(seed: u64) -> Result<String, String> {
    let mut r = testkit::rng(seed);
    for k in 0..50 {
        let sys = testkit::random_representing_system(&mut r, 5, 8);
        let n = testkit::random_coherent_net(&mut r, &sys, true);
        let a0 = testkit::random_complex(&mut r);
        let a1 = testkit::random_complex(&mut r);
        let p1 = move |w: C64| a0 + a1 * w;
        let p2 = move |w: C64| w * w - a0;
        let lhs = borel_calculus(move |w| p1(w) * p2(w), &n).map_err(|e| e.to_string())?;
        let rhs = borel_calculus(p1, &n)
            .unwrap()
            .compose(&borel_calculus(p2, &n).unwrap())
            .unwrap();
        if lhs.sub(&rhs).unwrap().max_seminorm() > tol::SPECTRAL_LAWS {
            return Err(format!("case {k}: multiplicativity failed"));
        }
        let conj = borel_calculus(|w| w.conj(), &n).unwrap();
        if conj.sub(&n.adjoint()).unwrap().max_seminorm() > tol::SPECTRAL_LAWS {
            return Err(format!("case {k}: involution failed"));
        }
        let unit = borel_calculus(|_| C64::new(1.0, 0.0), &n).unwrap();
        if unit
            .sub(&CoherentOperator::identity_on(sys.clone()))
            .unwrap()
            .max_seminorm()
            > tol::SPECTRAL_LAWS
        {
            return Err(format!("case {k}: unitality failed"));
        }
    }
    // composition rule on multipliers over the fractal function spaces
    let p = IfsParams::default_figure();
    let hs = build_inductive_system(SystemVariant::Linear, &p, 1).unwrap();
    let l2 = crate::measure::discretize_l2_system(&hs.system, 2).unwrap();
    let phi = crate::measure::LocFunction::from_fn(&l2, |pt| pt.position).unwrap();
    let m_phi = crate::operator::multiplication_operator(&phi, &l2).unwrap();
    let psi = |w: C64| w * w + C64::new(0.25, 0.0);
    let lhs = borel_calculus(psi, &m_phi).map_err(|e| e.to_string())?;
    let rhs = crate::operator::multiplication_operator(&phi.map(psi), &l2).unwrap();
    if lhs.sub(&rhs).unwrap().max_seminorm() > tol::SPECTRAL_LAWS {
        return Err("composition rule for multipliers failed".into());
    }
    Ok("50 random calculi plus the multiplier composition rule".into())
}

fn criterion_functional_model(seed: u64) -> Result<String, String> {
    let mut r = testkit::rng(seed);
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let sys = testkit::random_inoue_system(&mut r, 5, 10);
        let n = testkit::random_coherent_net(&mut r, &sys, true);
        let w = testkit::random_witness(&mut r, sys.index());
        let fm = functional_model(&n, &w).map_err(|e| format!("case {k}: {e}"))?;
        if fm.max_residual() > tol::MODEL_RESIDUAL {
            return Err(format!("case {k}: residual {:.3e}", fm.max_residual()));
        }
        worst = worst.max(fm.max_residual());
        for el in sys.index().elements() {
            let u = fm.model.unitarity_residuals()[el];
            if u > tol::STRUCT_EXACT {
                return Err(format!("case {k}: unitarity residual {u:.3e} at {el}"));
            }
            let (total, dim) = fm.model.dimension_bookkeeping(el);
            if total != dim {
                return Err(format!("case {k}: bookkeeping {total} != {dim} at {el}"));
            }
            let sup = fm.model.sup_phi(el);
            let bound = n.seminorm(el).unwrap() + tol::MODEL_RESIDUAL;
            if sup > bound {
                return Err(format!("case {k}: sup bound violated at {el}"));
            }
        }
    }
    Ok(format!("50 models pass, worst residual {worst:.2e}"))
}

fn criterion_representing_certificates() -> Result<String, String> {
    // direct-sum constructions commute exactly, with 0/1 integer entries
    let (ds, _) = hata::branch_indexed_order(2);
    let dims = ds.elements().iter().map(|e| (e.clone(), 1usize)).collect();
    let sys = crate::hilbert::build_inoue_space(&ds, &dims).map_err(|e| e.to_string())?;
    let top = ds.top().unwrap();
    for (a, b) in ds.unordered_pairs() {
        let pa = sys.projection_onto(&a, &top).unwrap();
        let pb = sys.projection_onto(&b, &top).unwrap();
        for m in [&pa, &pb] {
            for v in m.iter() {
                if v.im != 0.0 || (v.re != 0.0 && v.re != 1.0) {
                    return Err("projection entries are not exact 0/1".into());
                }
            }
        }
        if &pa * &pb != &pb * &pa {
            return Err(format!("projections at ({a}, {b}) do not commute exactly"));
        }
    }
    // discretized function-space systems over the fractal pass strictly
    let p = IfsParams::default_figure();
    for depth in 1..=3usize {
        let hs = build_inductive_system(SystemVariant::Linear, &p, depth).unwrap();
        let l2 = crate::measure::discretize_l2_system(&hs.system, 2).unwrap();
        l2.hilbert
            .check_representing(1e-12)
            .map_err(|e| format!("depth {depth}: {e}"))?;
    }
    // the non-nested counterexample is rejected with the right triple
    let ds = crate::order::DirectedSet::validate(
        &["a".into(), "b".into(), "t".into()],
        &[
            ("a".into(), "a".into()),
            ("b".into(), "b".into()),
            ("t".into(), "t".into()),
            ("a".into(), "t".into()),
            ("b".into(), "t".into()),
        ],
    )
    .unwrap();
    let r = 1.0 / 2.0f64.sqrt();
    let mut embeddings = std::collections::BTreeMap::new();
    embeddings.insert(
        ("a".to_string(), "t".to_string()),
        crate::linalg::CMat::from_row_slice(2, 1, &[crate::linalg::cone(), crate::linalg::czero()]),
    );
    embeddings.insert(
        ("b".to_string(), "t".to_string()),
        crate::linalg::CMat::from_row_slice(2, 1, &[C64::new(r, 0.0), C64::new(r, 0.0)]),
    );
    let sys = crate::hilbert::InductiveHilbertSystem::from_parts(
        ds,
        [
            ("a".to_string(), 1),
            ("b".to_string(), 1),
            ("t".to_string(), 2),
        ]
        .into(),
        embeddings,
    )
    .unwrap();
    match sys.check_representing(tol::REPRESENTING) {
        Err(crate::hilbert::HilbertError::NotRepresenting {
            a,
            b,
            ambient,
            norm,
        }) => {
            if (a.as_str(), b.as_str(), ambient.as_str()) != ("a", "b", "t") {
                return Err("counterexample witness names the wrong triple".into());
            }
            if (norm - 0.5).abs() > 1e-12 {
                return Err(format!("counterexample norm {norm}, expected 0.5"));
            }
        }
        other => return Err(format!("counterexample not rejected: {other:?}")),
    }
    Ok("exact commutation, strict function-space certificates, counterexample rejected".into())
}

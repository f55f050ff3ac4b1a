//! Acceptance run: one PASS/FAIL line per criterion. Positional arguments
//! select criteria by name substring; `cargo test --test acceptance -- trajectory`.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{client, first_user, fixture, middleware, relabel, request, run_cluster, users_of, Server};
use duagate::bench::{run_latency, run_trajectory, LatencyConfig, Scenario, TrajectoryConfig, STAGES};
use duagate::middleware::{read_log, MiddlewareConfig, ScoreUpdate};
use duagate::ontology::vocab::*;
use duagate::ontology::{read_dua, DuaRecord, PrincipalKind};
use duagate::policy::PolicyRegistry;
use duagate::query::{eval_ask, eval_select, eval_update, Query, UpdateSummary};
use duagate::store::{Graph, Term};
use duagate::synth::{generate_demographics, organization_iri, GeneratorSpec, CUSTODIAN};
use duagate::trust::{
    apply_org_identity_penalty, apply_org_penalty, apply_user_penalty, assess, check_lockout, rewrite_dua_reset,
    AssessmentConfig, PenaltyConfig, PenaltyKind, Score, ScoreName, TrustRecord, TrustRegistry, SCALE,
};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let held: bool = $cond;
        if !held {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("policy-fidelity", policy_fidelity),
        ("demographics-exactness", demographics_exactness),
        ("trajectory-reproduction", trajectory_reproduction),
        ("latency-trends", latency_trends),
        ("query-oracle-equivalence", query_oracle_equivalence),
        ("score-safety-fuzz", score_safety_fuzz),
        ("lockout-protocol", lockout_protocol),
        ("replica-convergence", replica_convergence),
        ("replay-determinism", replay_determinism),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{secs:.2}s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why} [{secs:.2}s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn within(started: Instant, budget: Duration, what: &str) -> Result<(), String> {
    let spent = started.elapsed();
    ensure!(spent < budget, "{what} took {spent:?}, budget {budget:?}");
    Ok(())
}

// Verbatim from the published policies; only the fixture is adapted to them.
const DUA_EXISTENCE: &str = r#"ASK{
   ?dataCustodian a syn:Organization .
   ?dataCustodian rdfs:label "DataCustodian"^^rdf:PlainLiteral .
   ?user a tst:User .
   ?user rdfs:label "physician_105"^^rdf:PlainLiteral .
   ?user syn:isAffiliatedWith ?organization .
   ?dua a dua:DataUsageAgreement .
   ?dua dua:hasRecipient ?organization .
   ?dua dua:hasDataCustodian ?dataCustodian .
}"#;

const REQUESTED_DATA: &str = r#"ASK{
   ?dataCustodian a syn:Organization .
   ?dataCustodian rdfs:label "DataCustodian"^^rdf:PlainLiteral .
   ?user a tst:User .
   ?user rdfs:label "nurse_207"^^rdf:PlainLiteral .
   ?user syn:isAffiliatedWith ?organization .
   ?dua a dua:DataUsageAgreement .
   ?dua dua:hasRecipient ?organization .
   ?dua dua:hasDataCustodian ?dataCustodian .
   ?dua dua:requestedData syn:Patient^^rdf:PlainLiteral .
}"#;

const CUSTODIAN_CATEGORY: &str = r#"ASK {
  ?dataCustodian a syn:Organization .
  ?dataCustodian rdfs:label "DataCustodian"^^rdf:PlainLiteral .
  ?user a tst:User .
  ?user rdfs:label "nurse_629"^^rdf:PlainLiteral .
  ?user syn:isAffiliatedWith ?org .
  ?dua a dua:DataUsageAgreement .
  ?dua dua:hasRecipient ?org .
  ?dua dua:hasDataCustodian ?dataCustodian .
  ?dua dua:requestedData ?requestedData.
  FILTER(STR(?requestedData) IN ( STR(syn:Encounter), STR(syn:Observation), STR(syn:Patient)))
}"#;

const BEHAVIOR_UPDATE: &str = r#"DELETE {
   ?user tst:behaviorTrust "1.0"^^xsd:float .
}
INSERT {
   ?user tst:behaviorTrust "0.9"^^xsd:float .
}
WHERE {
   ?user a tst:User .
   ?user rdfs:label "research_scientist_731"^^rdf:PlainLiteral .
}"#;

/// The listings name users the generated fixture does not have, so the
/// first user of organization `k` takes the listing's label.
fn ask_as(base: &Graph, listing: &str, label: &str, k: usize) -> Result<bool, String> {
    let mut g = base.clone();
    let user = users_of(&g, k)[0].clone();
    relabel(&mut g, &user, label);
    let q = Query::parse(listing).map_err(|e| e.to_string())?;
    eval_ask(&q, &g).map_err(|e| e.to_string())
}

fn policy_fidelity() -> Outcome {
    let base = fixture(50);
    let started = Instant::now();
    // organization k=0: public health, all three categories
    // k=4: operations, Encounter only; k=5: research, RiskFactor only; k=9: no agreement
    let cases = [
        ("dua existence", DUA_EXISTENCE, "physician_105", 0, true),
        ("dua existence", DUA_EXISTENCE, "physician_105", 9, false),
        ("requested data", REQUESTED_DATA, "nurse_207", 0, true),
        ("requested data", REQUESTED_DATA, "nurse_207", 4, false),
        ("custodian category", CUSTODIAN_CATEGORY, "nurse_629", 0, true),
        ("custodian category", CUSTODIAN_CATEGORY, "nurse_629", 5, false),
    ];
    for (what, listing, label, k, expected) in cases {
        let got = ask_as(&base, listing, label, k)?;
        ensure!(
            got == expected,
            "{what} for organization {k}: expected {expected}, got {got}"
        );
    }

    // the registry's templates agree with the verbatim text on the same users
    let policies = PolicyRegistry::builtin();
    let tm = duagate::middleware::TrustedMiddleware::new(base.clone(), MiddlewareConfig::default(), policies);
    for (k, category, expected) in [
        (0, SYN_PATIENT, [true, true]),
        (9, SYN_PATIENT, [false, false]),
        (4, SYN_PATIENT, [true, false]),
    ] {
        let u = first_user(&tm, k);
        let r = tm
            .policies()
            .evaluate(&request("f", &u, category, DUA_PUBLIC_HEALTH), &base)
            .map_err(|e| e.to_string())?;
        let passed: Vec<bool> = r
            .per_policy
            .iter()
            .take(2)
            .map(|o| o.status == duagate::policy::PolicyStatus::Passed)
            .collect();
        ensure!(passed == expected, "templates for organization {k}: {passed:?}");
    }

    // the update listing on a fixture whose scores are projected
    let mut g = tm.read_graph(Graph::clone);
    let user = users_of(&g, 2)[0].clone();
    relabel(&mut g, &user, "research_scientist_731");
    let before = g.clone();
    let q = Query::parse(BEHAVIOR_UPDATE).map_err(|e| e.to_string())?;
    let summary = eval_update(&q, &mut g).map_err(|e| e.to_string())?;
    ensure!(
        summary
            == UpdateSummary {
                deleted: 1,
                inserted: 1
            },
        "update changed {summary:?}"
    );
    let u = Term::iri(&user).unwrap();
    let score = g.objects(&u, &Term::iri(TST_BEHAVIOR_TRUST).unwrap());
    ensure!(
        score == vec![Term::typed("0.9", XSD_FLOAT).unwrap()],
        "behavior trust is now {score:?}"
    );
    let changed = before.len() + g.len() - 2 * before.iter().filter(|t| g.contains(t)).count();
    ensure!(changed == 2, "{changed} triples changed, expected 2");
    within(started, Duration::from_secs(1), "policy evaluation")?;
    Ok("6 verbatim ASK outcomes, template agreement, behavior trust 1.0 -> 0.9".into())
}

fn count(g: &Graph, select: &str) -> usize {
    eval_select(&Query::parse(select).unwrap(), g).unwrap().len()
}

fn demographics_exactness() -> Outcome {
    let g = generate_demographics(&GeneratorSpec::new(1, 1)).map_err(|e| e.to_string())?;
    let counts = [
        (
            "recipient organizations",
            eval_select(&Query::parse("SELECT ?o WHERE { ?o a syn:Organization }").unwrap(), &g)
                .unwrap()
                .rows()
                .filter(|r| r[0].lexical() != CUSTODIAN)
                .count(),
            10,
        ),
        ("users", count(&g, "SELECT ?u WHERE { ?u a tst:User }"), 100),
        ("agreements", count(&g, "SELECT ?d WHERE { ?d a dua:DataUsageAgreement }"), 7),
        (
            "patient agreements",
            count(&g, "SELECT ?d WHERE { ?d a dua:DataUsageAgreement . ?d dua:requestedData ?c . FILTER(STR(?c) = STR(syn:Patient)) }"),
            4,
        ),
        (
            "public-health agreements",
            count(&g, "SELECT ?d WHERE { ?d dua:hasPermittedUseOrDisclosure dua:PublicHealth }"),
            2,
        ),
        (
            "users with an affiliation",
            count(&g, "SELECT ?u WHERE { ?u a tst:User . ?u syn:isAffiliatedWith ?o . ?o a syn:Organization }"),
            100,
        ),
    ];
    for (what, got, expected) in counts {
        ensure!(got == expected, "{what}: {got}, expected {expected}");
    }
    Ok("10 organizations, 100 users, 7 agreements, 4 for Patient, 2 for public health".into())
}

fn trajectory_reproduction() -> Outcome {
    let started = Instant::now();
    let cfg = TrajectoryConfig {
        runs: 1000,
        violation_prob: 0.3,
        ..TrajectoryConfig::default()
    };
    let report = run_trajectory(&cfg).map_err(|e| e.to_string())?;
    within(started, Duration::from_secs(120), "1000 runs per scenario")?;
    let mut detail = Vec::new();
    for s in &report.scenarios {
        let deduction = match s.scenario {
            Scenario::UserWithDuaViolations => cfg.penalties.dua_violation,
            Scenario::UserWithoutDua => cfg.penalties.no_dua_request,
            Scenario::OrgMissingCategory => cfg.penalties.missing_category,
            Scenario::OrgMissingProperties => cfg.penalties.missing_properties,
        };
        // negative binomial: violations needed over the violation probability
        let needed = SCALE.div_ceil(deduction.units());
        let oracle = f64::from(needed) / cfg.violation_prob;
        ensure!(s.runs.len() == 1000, "{}: {} runs", s.scenario.name(), s.runs.len());
        for r in &s.runs {
            ensure!(
                r.points.windows(2).all(|w| w[0].0 < w[1].0 && w[1].1 <= w[0].1),
                "{} run {} is not non-increasing",
                s.scenario.name(),
                r.run
            );
            let last = r.points.last().expect("at least the start point");
            ensure!(
                last.1 == Score::ZERO && r.transactions_to_zero == Some(last.0),
                "{} run {} ended at {} after {} transactions",
                s.scenario.name(),
                r.run,
                last.1,
                last.0
            );
        }
        let mean = s.mean_transactions_to_zero.ok_or("no mean")?;
        ensure!(
            (mean - oracle).abs() <= 0.05 * oracle,
            "{}: mean {mean:.1}, oracle {oracle:.1}",
            s.scenario.name()
        );
        detail.push(format!("{} {mean:.1} (oracle {oracle:.1})", s.scenario.name()));
    }
    Ok(detail.join(", "))
}

fn latency_trends() -> Outcome {
    let started = Instant::now();
    let cfg = LatencyConfig::default();
    let report = run_latency(&cfg).map_err(|e| e.to_string())?;
    within(started, Duration::from_secs(15 * 60), "latency run")?;
    let means = |stage: &str| -> Vec<f64> {
        cfg.sizes
            .iter()
            .map(|&n| report.stage(n, stage).unwrap().mean)
            .collect()
    };
    let spread = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max) / v.iter().cloned().fold(f64::INFINITY, f64::min);
    let retrieval = means(STAGES[3]);
    let growth = retrieval[retrieval.len() - 1] / retrieval[0];
    let mut detail = vec![format!("retrieval 100K/1K {growth:.1}x")];
    ensure!(growth >= 10.0, "retrieval grew only {growth:.2}x: {retrieval:?}");
    for stage in &STAGES[..3] {
        let m = means(stage);
        let s = spread(&m);
        ensure!(s < 3.0, "{stage} varies {s:.2}x across sizes: {m:?}");
        detail.push(format!("{stage} {s:.2}x"));
    }
    Ok(detail.join(", "))
}

const NODES: [&str; 4] = ["n0", "n1", "n2", "n3"];
const PREDICATES: [&str; 3] = ["p0", "p1", "p2"];
const LITERALS: [&str; 2] = ["a", "b"];
const VARS: [&str; 4] = ["v0", "v1", "v2", "v3"];

#[derive(Clone, Debug)]
enum Slot {
    Var(&'static str),
    Const(Term),
}

fn node(name: &str) -> Term {
    Term::iri(format!("{SYN}{name}")).unwrap()
}

fn random_object(rng: &mut ChaCha8Rng) -> Term {
    if rng.random_bool(0.3) {
        Term::plain(LITERALS.choose(rng).unwrap())
    } else {
        node(NODES.choose(rng).unwrap())
    }
}

fn random_slot(rng: &mut ChaCha8Rng, constant: impl FnOnce(&mut ChaCha8Rng) -> Term) -> Slot {
    if rng.random_bool(0.55) {
        Slot::Var(VARS.choose(rng).unwrap())
    } else {
        Slot::Const(constant(rng))
    }
}

fn slot_text(s: &Slot) -> String {
    match s {
        Slot::Var(v) => format!("?{v}"),
        Slot::Const(t) => t.to_string(),
    }
}

/// Every assignment of the pattern variables that maps each pattern onto a
/// graph triple, found by trying each triple for each pattern in turn.
fn brute_force(
    patterns: &[[Slot; 3]],
    triples: &[[Term; 3]],
    bound: &mut BTreeMap<&'static str, Term>,
    out: &mut Vec<BTreeMap<&'static str, Term>>,
) {
    let Some((first, rest)) = patterns.split_first() else {
        out.push(bound.clone());
        return;
    };
    for t in triples {
        let mut added = Vec::new();
        let mut ok = true;
        for (slot, term) in first.iter().zip(t) {
            match slot {
                Slot::Const(c) => ok &= c == term,
                Slot::Var(v) => match bound.get(v) {
                    Some(b) => ok &= b == term,
                    None => {
                        bound.insert(v, term.clone());
                        added.push(*v);
                    }
                },
            }
            if !ok {
                break;
            }
        }
        if ok {
            brute_force(rest, triples, bound, out);
        }
        for v in added {
            bound.remove(v);
        }
    }
}

fn query_oracle_equivalence() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (graphs, per_graph) = (300, 5);
    let mut solutions = 0usize;
    for case in 0..graphs {
        let mut g = Graph::new();
        for _ in 0..rng.random_range(0..=30) {
            let s = node(NODES.choose(&mut rng).unwrap());
            let p = node(PREDICATES.choose(&mut rng).unwrap());
            let o = random_object(&mut rng);
            g.insert_terms(s, p, o).unwrap();
        }
        let triples: Vec<[Term; 3]> = g
            .iter()
            .map(|t| {
                let (s, p, o) = t.into_parts();
                [s, p, o]
            })
            .collect();
        for _ in 0..per_graph {
            let patterns: Vec<[Slot; 3]> = (0..rng.random_range(0..=4))
                .map(|_| {
                    [
                        random_slot(&mut rng, |r| node(NODES.choose(r).unwrap())),
                        random_slot(&mut rng, |r| node(PREDICATES.choose(r).unwrap())),
                        random_slot(&mut rng, random_object),
                    ]
                })
                .collect();
            let mut vars: Vec<&'static str> = Vec::new();
            for v in patterns.iter().flatten().filter_map(|s| match s {
                Slot::Var(v) => Some(*v),
                Slot::Const(_) => None,
            }) {
                if !vars.contains(&v) {
                    vars.push(v);
                }
            }
            vars.shuffle(&mut rng);
            vars.truncate(rng.random_range(1..=vars.len().max(1)));
            let body: String = patterns
                .iter()
                .map(|p| format!("{} {} {} . ", slot_text(&p[0]), slot_text(&p[1]), slot_text(&p[2])))
                .collect();
            let projection = if vars.is_empty() {
                "*".to_string()
            } else {
                vars.iter().map(|v| format!("?{v}")).collect::<Vec<_>>().join(" ")
            };
            let select_text = format!("SELECT {projection} WHERE {{ {body}}}");
            let ask_text = format!("ASK {{ {body}}}");

            let mut found = Vec::new();
            brute_force(&patterns, &triples, &mut BTreeMap::new(), &mut found);
            let mut expected: Vec<Vec<Term>> = found
                .iter()
                .map(|m| vars.iter().map(|v| m[v].clone()).collect())
                .collect();
            expected.sort();
            solutions += found.len();

            let select = Query::parse(&select_text).map_err(|e| format!("{select_text}: {e}"))?;
            let got: Vec<Vec<Term>> = eval_select(&select, &g)
                .map_err(|e| e.to_string())?
                .rows()
                .map(<[Term]>::to_vec)
                .collect();
            ensure!(
                got == expected,
                "graph {case}, {select_text}: {} rows, oracle {}",
                got.len(),
                expected.len()
            );
            let ask = Query::parse(&ask_text).map_err(|e| format!("{ask_text}: {e}"))?;
            let holds = eval_ask(&ask, &g).map_err(|e| e.to_string())?;
            ensure!(holds == !found.is_empty(), "graph {case}, {ask_text}: {holds}");
        }
    }
    within(started, Duration::from_secs(30), "oracle comparison")?;
    Ok(format!(
        "{graphs} graphs x {per_graph} patterns, {solutions} solutions matched"
    ))
}

fn check_record(before: Option<&TrustRecord>, after: &TrustRecord) -> Result<(), String> {
    for name in ScoreName::ALL {
        let Some(cell) = after.cell(name) else { continue };
        ensure!(cell.value.units() <= SCALE, "{} {name} is {}", after.iri(), cell.value);
        if let Some(old) = before.and_then(|b| b.cell(name)) {
            ensure!(
                cell.version >= old.version,
                "{} {name} version went {} -> {}",
                after.iri(),
                old.version,
                cell.version
            );
        }
    }
    if let Some(b) = before {
        ensure!(
            after.version >= b.version,
            "{} version went {} -> {}",
            after.iri(),
            b.version,
            after.version
        );
    }
    Ok(())
}

fn score_safety_fuzz() -> Outcome {
    let base = generate_demographics(&GeneratorSpec::new(1, 1)).map_err(|e| e.to_string())?;
    let base_registry = TrustRegistry::from_graph(&base);
    let mut base_graph = base.clone();
    base_registry.project_all(&mut base_graph);
    let principals: Vec<String> = base_registry.iter().map(|r| r.iri().to_string()).collect();
    let orgs: Vec<String> = (0..10).map(organization_iri).collect();
    let kinds = [
        PenaltyKind::DuaViolation,
        PenaltyKind::NoDuaRequest,
        PenaltyKind::MissingCategory,
        PenaltyKind::MissingProperties,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut ops, mut rejected, mut resets) = (0usize, 0usize, 0usize);
    for seq in 0..10_000 {
        let mut registry = base_registry.clone();
        let mut g = base_graph.clone();
        let units = |r: &mut ChaCha8Rng| Score::from_units(r.random_range(1..=SCALE)).unwrap();
        let penalties = PenaltyConfig {
            dua_violation: units(&mut rng),
            no_dua_request: units(&mut rng),
            missing_category: units(&mut rng),
            missing_properties: units(&mut rng),
            tolerance_grace: rng.random_range(0..3),
        };
        for _ in 0..rng.random_range(1..=30) {
            ops += 1;
            let who = principals.choose(&mut rng).unwrap().clone();
            let org = orgs.choose(&mut rng).unwrap().clone();
            let touched = [who.clone(), CUSTODIAN.to_string(), org.clone()];
            let before: Vec<TrustRecord> = touched.iter().map(|p| registry.get(p).unwrap().clone()).collect();
            let kind = *kinds.choose(&mut rng).unwrap();
            let ok = match rng.random_range(0..7) {
                0 => apply_user_penalty(registry.require_mut(&who).unwrap(), kind, &penalties).is_ok(),
                1 => apply_org_penalty(registry.require_mut(&who).unwrap(), kind, &penalties).is_ok(),
                2 => apply_org_identity_penalty(registry.require_mut(&who).unwrap(), kind, &penalties).is_ok(),
                3 => {
                    let threshold = Score::from_units(rng.random_range(0..=SCALE)).unwrap();
                    let cfg = AssessmentConfig::new(rng.random_range(0.0..4.0), rng.random_range(0.01..4.0), threshold)
                        .unwrap();
                    match assess(registry.get(&who).unwrap(), &cfg) {
                        Ok(a) => {
                            ensure!(
                                (0.0..=1.0).contains(&a.weighted_average),
                                "sequence {seq}: weighted average {}",
                                a.weighted_average
                            );
                            true
                        }
                        Err(_) => false,
                    }
                }
                4 => {
                    let mut dua = DuaRecord::new(format!("{SYN}dua_fuzz"), CUSTODIAN, org.clone());
                    dua.requested_data.insert(SYN_PATIENT.into());
                    dua.permitted_use_or_disclosure.insert(DUA_PUBLIC_HEALTH.into());
                    let (c, r) = registry.pair_mut(CUSTODIAN, &org).unwrap();
                    let locked = check_lockout(c, r).unwrap();
                    let done = rewrite_dua_reset(c, r, &dua, &mut g).is_ok();
                    ensure!(
                        done == locked,
                        "sequence {seq}: reset of a pair locked={locked} returned {done}"
                    );
                    if done {
                        resets += 1;
                        ensure!(
                            !check_lockout(c, r).unwrap(),
                            "sequence {seq}: pair still locked after reset"
                        );
                    }
                    done
                }
                5 => {
                    let kind = registry.get(&who).unwrap().kind();
                    let name = *ScoreName::ALL.choose(&mut rng).unwrap();
                    registry
                        .merge_remote(&who, kind, name, units(&mut rng), rng.random_range(0..60))
                        .is_ok()
                }
                _ => {
                    let (c, r) = registry.pair_mut(CUSTODIAN, &org).unwrap();
                    c.lock_with(r.iri());
                    r.lock_with(c.iri());
                    true
                }
            };
            for (p, b) in touched.iter().zip(&before) {
                let after = registry.get(p).unwrap();
                if !ok {
                    ensure!(after == b, "sequence {seq}: rejected operation changed {p}");
                }
                check_record(Some(b), after).map_err(|e| format!("sequence {seq}: {e}"))?;
                registry.project(p, &mut g).unwrap();
            }
            rejected += usize::from(!ok);
        }
        ensure!(
            registry.projection_consistent(&g),
            "sequence {seq}: graph disagrees with the registry"
        );
    }
    Ok(format!(
        "10000 sequences, {ops} operations ({rejected} rejected, {resets} resets)"
    ))
}

fn post(c: &reqwest::blocking::Client, s: &Server, path: &str, body: &impl serde::Serialize) -> (u16, Value) {
    let r = c.post(s.url(path)).json(body).send().unwrap();
    (r.status().as_u16(), r.json().unwrap())
}

fn lockout_protocol() -> Outcome {
    let s = Server::start(middleware(20, MiddlewareConfig::default()));
    let c = client();
    let risky = first_user(&s.tm, 5);
    let mut hits = 0;
    loop {
        let (status, body) = post(
            &c,
            &s,
            "/requests",
            &request(&format!("m{hits}"), &risky, SYN_RISK_FACTOR, DUA_IRB_APPROVED_RESEARCH),
        );
        ensure!(status == 200, "missing-category request answered {status}");
        hits += 1;
        let trust: Value = c
            .get(s.url("/trust/syn:data_custodian"))
            .send()
            .unwrap()
            .json()
            .unwrap();
        if trust["credibility"]["value"] == 0.0 {
            let notices = body["custodianNotices"].as_array().unwrap();
            ensure!(notices.len() == 2, "zero credibility raised {} notices", notices.len());
            break;
        }
        ensure!(hits < 100, "credibility never reached zero");
    }
    // every organization is now cut off, compliant or not
    let mut denied = 0;
    for k in 0..10 {
        let u = first_user(&s.tm, k);
        let (status, body) = post(
            &c,
            &s,
            "/requests",
            &request(&format!("l{k}"), &u, SYN_PATIENT, DUA_PUBLIC_HEALTH),
        );
        ensure!(status == 200, "request during lockout answered {status}");
        ensure!(
            body["decision"]["granted"] == false && body["decision"]["lockoutTriggered"] == true,
            "organization {k} was not locked out: {}",
            body["decision"]
        );
        ensure!(
            body["decision"]["appliedPenalties"].as_array().unwrap().is_empty(),
            "penalty during lockout"
        );
        denied += 1;
    }
    let clean = request("after", &first_user(&s.tm, 0), SYN_PATIENT, DUA_PUBLIC_HEALTH);
    let (_, blocked) = post(&c, &s, "/requests", &clean);
    ensure!(blocked["decision"]["granted"] == false, "granted before the rewrite");

    let mut dua = read_dua(&s.tm.read_graph(Graph::clone), &format!("{SYN}dua_06"))
        .map_err(|e| e.to_string())?
        .record;
    dua.term = "24 months".into();
    let (status, body) = post(&c, &s, "/admin/dua", &dua);
    ensure!(
        status == 200 && body["rewritten"] == true,
        "rewrite answered {status} {body}"
    );
    let (_, after) = post(&c, &s, "/requests", &clean);
    ensure!(
        after["decision"]["granted"] == true && after["decision"]["lockoutTriggered"] == false,
        "same request after the rewrite: {}",
        after["decision"]
    );
    ensure!(
        after["records"]["rows"].as_array().unwrap().len() == 20,
        "records missing after the rewrite"
    );
    let (status, _) = post(&c, &s, "/admin/dua", &dua);
    ensure!(status == 409, "second rewrite answered {status}");
    Ok(format!(
        "credibility 0 after {hits} missing-category requests, {denied} organizations denied, granted after rewrite"
    ))
}

fn replica_convergence() -> Outcome {
    let mut rounds = Vec::new();
    for seed in [1, 2, 3, 4, 5] {
        let run = run_cluster(seed, 1000, 8);
        ensure!(
            run.replicas
                .iter()
                .all(|r| r.pending_updates().values().all(|&n| n == 0)),
            "seed {seed}: queues not drained after {} rounds",
            run.settle_rounds
        );
        if let Some(d) = common::divergence(&run.replicas) {
            return Err(format!("seed {seed}: {d}"));
        }
        ensure!(
            run.replicas.iter().all(|r| r.projection_consistent()),
            "seed {seed}: projection drifted"
        );
        rounds.push(run.settle_rounds);
    }
    Ok(format!(
        "5 seeds x 1000 transactions on 3 replicas, settled in {rounds:?} rounds"
    ))
}

fn replay_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("tx.jsonl");
    let live = middleware(30, MiddlewareConfig::default())
        .with_log_file(&path)
        .map_err(|e| e.to_string())?;
    let users = live.read_graph(|g| (0..10).flat_map(|k| users_of(g, k)).collect::<Vec<_>>());
    let categories = [
        SYN_PATIENT,
        SYN_ENCOUNTER,
        SYN_OBSERVATION,
        SYN_RISK_FACTOR,
        SYN_SYMPTOM,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut rewrites = 0;
    for n in 0..1000 {
        let req = request(
            &format!("t{n}"),
            users.choose(&mut rng).unwrap(),
            categories.choose(&mut rng).unwrap(),
            PERMITTED_USES.choose(&mut rng).unwrap(),
        );
        let resp = live.handle_request(&req).map_err(|e| e.to_string())?;
        if resp.decision.lockout_triggered {
            let dua = read_dua(&live.read_graph(Graph::clone), &format!("{SYN}dua_06"))
                .map_err(|e| e.to_string())?
                .record;
            live.rewrite_dua(&dua).map_err(|e| e.to_string())?;
            rewrites += 1;
        }
        if n % 97 == 0 {
            let update = ScoreUpdate {
                principal: req.user.clone(),
                principal_kind: PrincipalKind::User,
                score: ScoreName::Identity,
                value: Score::from_units(rng.random_range(0..=SCALE)).unwrap(),
                version: 10_000 + n as u64,
                origin: "tm-peer".into(),
            };
            live.receive_scores(&[update]).map_err(|e| e.to_string())?;
        }
    }
    let log = read_log(&path).map_err(|e| e.to_string())?;
    let transactions = log
        .iter()
        .filter(|r| matches!(r, duagate::middleware::LogRecord::Request { .. }))
        .count();
    ensure!(transactions == 1000, "{transactions} request records logged");
    let fresh = middleware(30, MiddlewareConfig::default());
    fresh.replay(&log).map_err(|e| e.to_string())?;
    let (a, b) = (live.registry_snapshot(), fresh.registry_snapshot());
    ensure!(a == b, "registries differ after replay");
    let bits = |r: &TrustRegistry| serde_json::to_string(&r.iter().collect::<Vec<_>>()).unwrap();
    ensure!(bits(&a) == bits(&b), "serialized registries differ");
    ensure!(
        live.read_graph(Graph::clone) == fresh.read_graph(Graph::clone),
        "graphs differ after replay"
    );
    Ok(format!(
        "{} log records ({rewrites} rewrites) replayed to an identical registry and graph",
        log.len()
    ))
}

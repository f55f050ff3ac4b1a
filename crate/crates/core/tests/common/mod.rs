//! Helpers shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use std::sync::Arc;

use duagate::middleware::{http, MiddlewareConfig, TrustedMiddleware};
use duagate::ontology::vocab::{RDFS_LABEL, SYN_IS_AFFILIATED_WITH};
use duagate::ontology::DataCategoryRef;
use duagate::policy::{DataRequest, PolicyRegistry};
use duagate::store::{Graph, Term};
use duagate::synth::{generate, organization_iri, GeneratorSpec, CUSTODIAN};

pub fn fixture(patients: usize) -> Graph {
    generate(&GeneratorSpec::new(1, patients)).expect("valid generator settings")
}

pub fn middleware(patients: usize, config: MiddlewareConfig) -> TrustedMiddleware {
    TrustedMiddleware::new(fixture(patients), config, PolicyRegistry::builtin())
}

/// Users of the zero-based organization `k`, sorted by IRI.
pub fn users_of(g: &Graph, k: usize) -> Vec<String> {
    let mut v: Vec<String> = g
        .subjects(
            &Term::iri(SYN_IS_AFFILIATED_WITH).unwrap(),
            &Term::iri(organization_iri(k)).unwrap(),
        )
        .iter()
        .map(|t| t.lexical().to_string())
        .collect();
    v.sort();
    v
}

pub fn first_user(tm: &TrustedMiddleware, k: usize) -> String {
    tm.read_graph(|g| users_of(g, k))[0].clone()
}

/// Gives `user` the label `label` in place of its current one.
pub fn relabel(g: &mut Graph, user: &str, label: &str) {
    let (u, p) = (Term::iri(user).unwrap(), Term::iri(RDFS_LABEL).unwrap());
    g.remove_matching(Some(&u), Some(&p), None);
    g.insert_terms(u, p, Term::plain(label)).unwrap();
}

pub fn request(id: &str, user: &str, category: &str, purpose: &str) -> DataRequest {
    DataRequest {
        request_id: id.into(),
        user: user.into(),
        custodian: CUSTODIAN.into(),
        category: DataCategoryRef::new(category).unwrap(),
        purpose: purpose.into(),
        timestamp: None,
    }
}

/// A middleware instance behind a real listener on an ephemeral port.
pub struct Server {
    pub base: String,
    pub tm: Arc<TrustedMiddleware>,
    // Dropping the runtime stops the server.
    _rt: tokio::runtime::Runtime,
}

impl Server {
    pub fn start(tm: TrustedMiddleware) -> Server {
        let tm = Arc::new(tm);
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .unwrap();
        let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        rt.spawn(http::serve(tm.clone(), listener));
        Server { base, tm, _rt: rt }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }
}

pub fn client() -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder()
        .timeout(std::time::Duration::from_secs(30))
        .build()
        .unwrap()
}

/// Outcome of a replicated run.
pub struct ClusterRun {
    pub replicas: Vec<Arc<TrustedMiddleware>>,
    /// Delivery rounds needed after the workload stopped.
    pub settle_rounds: usize,
}

/// Three replicas take random requests in turn and gossip through a lossy,
/// duplicating, reordering transport; then delivery rounds run until every
/// queue is empty or `max_settle` rounds have passed.
pub fn run_cluster(seed: u64, transactions: usize, max_settle: usize) -> ClusterRun {
    use duagate::middleware::{Chaos, LocalTransport};
    use duagate::ontology::vocab::{PERMITTED_USES, SYN_ENCOUNTER, SYN_OBSERVATION, SYN_PATIENT, SYN_RISK_FACTOR};
    use rand::seq::IndexedRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    let names = ["tm-a", "tm-b", "tm-c"];
    let replicas: Vec<Arc<TrustedMiddleware>> = names
        .iter()
        .map(|&name| {
            let cfg = MiddlewareConfig {
                tm_id: name.into(),
                ..MiddlewareConfig::default()
            };
            let peers: Vec<&str> = names.iter().copied().filter(|&p| p != name).collect();
            Arc::new(middleware(5, cfg).with_peers(peers))
        })
        .collect();
    let mut net = LocalTransport::new().with_chaos(Chaos {
        seed,
        duplicate: 0.3,
        reorder: true,
    });
    for (name, tm) in names.iter().zip(&replicas) {
        net = net.with_peer(*name, tm.clone());
    }
    let users = replicas[0].read_graph(|g| (0..10).flat_map(|k| users_of(g, k)).collect::<Vec<_>>());
    let categories = [SYN_PATIENT, SYN_ENCOUNTER, SYN_OBSERVATION, SYN_RISK_FACTOR];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for n in 0..transactions {
        let at = rng.random_range(0..replicas.len());
        let req = request(
            &format!("c{n}"),
            users.choose(&mut rng).unwrap(),
            categories.choose(&mut rng).unwrap(),
            PERMITTED_USES.choose(&mut rng).unwrap(),
        );
        replicas[at].handle_request(&req).unwrap();
        if rng.random_bool(0.2) {
            // a peer drops off for one round
            let down = names.choose(&mut rng).unwrap();
            net.set_down(down, true);
            replicas[rng.random_range(0..replicas.len())].propagate_scores(&net);
            net.set_down(down, false);
        }
    }
    let mut settle_rounds = 0;
    while settle_rounds < max_settle && replicas.iter().any(|r| r.pending_updates().values().any(|&n| n > 0)) {
        for r in &replicas {
            r.propagate_scores(&net);
        }
        settle_rounds += 1;
    }
    ClusterRun {
        replicas,
        settle_rounds,
    }
}

/// First principal and score whose (value, version) differs between replicas.
pub fn divergence(replicas: &[Arc<TrustedMiddleware>]) -> Option<String> {
    use duagate::trust::ScoreName;
    let snapshots: Vec<_> = replicas.iter().map(|r| r.registry_snapshot()).collect();
    let mut principals: Vec<String> = snapshots
        .iter()
        .flat_map(|s| s.iter().map(|r| r.iri().to_string()))
        .collect();
    principals.sort();
    principals.dedup();
    for p in &principals {
        for name in ScoreName::ALL {
            let cells: Vec<_> = snapshots
                .iter()
                .map(|s| s.get(p).and_then(|r| r.cell(name)).map(|c| (c.value, c.version)))
                .collect();
            if cells.windows(2).any(|w| w[0] != w[1]) {
                return Some(format!("{p} {name}: {cells:?}"));
            }
        }
    }
    None
}

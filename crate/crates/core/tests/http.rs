mod common;

use std::time::Duration;

use common::{client, first_user, middleware, request, Server};
use duagate::middleware::{HttpTransport, MiddlewareConfig, Transport};
use duagate::ontology::vocab::*;
use duagate::ontology::DuaRecord;
use duagate::synth::{organization_iri, CUSTODIAN};
use serde_json::Value;

#[test]
fn compliant_request_returns_records_over_http() {
    let s = Server::start(middleware(40, MiddlewareConfig::default()));
    let u = first_user(&s.tm, 0);
    let resp = client()
        .post(s.url("/requests"))
        .json(&request("h1", &u, SYN_ENCOUNTER, DUA_PUBLIC_HEALTH))
        .send()
        .unwrap();
    assert_eq!(resp.status(), 200);
    let body: Value = resp.json().unwrap();
    assert_eq!(body["requestId"], "h1");
    assert_eq!(body["decision"]["granted"], true);
    assert_eq!(body["records"]["rows"].as_array().unwrap().len(), 40);
    assert_eq!(body["records"]["variables"].as_array().unwrap().len(), 3);
}

#[test]
fn denial_omits_records_and_reports_the_penalty() {
    let s = Server::start(middleware(5, MiddlewareConfig::default()));
    let u = first_user(&s.tm, 9);
    let body: Value = client()
        .post(s.url("/requests"))
        .json(&request("h1", &u, SYN_PATIENT, DUA_PUBLIC_HEALTH))
        .send()
        .unwrap()
        .json()
        .unwrap();
    assert_eq!(body["decision"]["granted"], false);
    assert!(body.get("records").is_none());
    assert_eq!(body["decision"]["appliedPenalties"][0]["kind"], "noDuaRequest");
    assert_eq!(body["decision"]["appliedPenalties"][0]["after"], 0.98);
}

#[test]
fn errors_map_to_status_codes() {
    let s = Server::start(middleware(5, MiddlewareConfig::default()));
    let c = client();
    let unknown = request("h1", &format!("{SYN}nobody"), SYN_PATIENT, DUA_PUBLIC_HEALTH);
    let r = c.post(s.url("/requests")).json(&unknown).send().unwrap();
    assert_eq!(r.status(), 404);
    assert!(r.json::<Value>().unwrap()["error"].as_str().unwrap().contains("nobody"));

    let mut bad = request("h2", &first_user(&s.tm, 0), SYN_PATIENT, DUA_PUBLIC_HEALTH);
    bad.purpose = SYN_PATIENT.into();
    assert_eq!(c.post(s.url("/requests")).json(&bad).send().unwrap().status(), 400);

    let garbage = c
        .post(s.url("/requests"))
        .header("content-type", "application/json")
        .body("{\"requestId\": 1}")
        .send()
        .unwrap();
    assert!(garbage.status().is_client_error());

    let dua = DuaRecord::new(format!("{SYN}dua_01"), CUSTODIAN, organization_iri(0));
    assert_eq!(c.post(s.url("/admin/dua")).json(&dua).send().unwrap().status(), 409);
}

#[test]
fn trust_lookup_accepts_prefixed_and_full_names() {
    let s = Server::start(middleware(5, MiddlewareConfig::default()));
    let c = client();
    let short: Value = c
        .get(s.url("/trust/syn:data_custodian"))
        .send()
        .unwrap()
        .json()
        .unwrap();
    assert_eq!(short["credibility"]["value"], 1.0);
    assert_eq!(short["principal"]["iri"], CUSTODIAN);
    let encoded = CUSTODIAN.replace(':', "%3A").replace('/', "%2F").replace('#', "%23");
    let full: Value = c
        .get(s.url(&format!("/trust/{encoded}")))
        .send()
        .unwrap()
        .json()
        .unwrap();
    assert_eq!(full, short);
    assert_eq!(c.get(s.url("/trust/syn:nobody")).send().unwrap().status(), 404);
    assert_eq!(c.get(s.url("/healthz")).send().unwrap().text().unwrap(), "ok");
}

#[test]
fn score_updates_travel_between_two_instances() {
    let b = Server::start(middleware(5, MiddlewareConfig::default()));
    let a = Server::start(middleware(5, MiddlewareConfig::default()).with_peers([b.base.clone()]));
    let u = first_user(&a.tm, 9);
    a.tm.handle_request(&request("p1", &u, SYN_PATIENT, DUA_PUBLIC_HEALTH))
        .unwrap();
    let transport = HttpTransport::new(Duration::from_secs(5)).unwrap();
    let reports = a.tm.propagate_scores(&transport);
    assert_eq!((reports[0].acked, reports[0].retained), (1, 0));
    let remote = b.tm.trust_record(&u).unwrap();
    assert_eq!(remote.behavior, a.tm.trust_record(&u).unwrap().behavior);
    assert_eq!(remote.behavior.unwrap().value.to_string(), "0.98");

    // redelivery is harmless
    let again = duagate::middleware::ScoreUpdate {
        principal: u.clone(),
        principal_kind: duagate::ontology::PrincipalKind::User,
        score: duagate::trust::ScoreName::Behavior,
        value: "0.98".parse().unwrap(),
        version: remote.behavior.unwrap().version,
        origin: "tm-1".into(),
    };
    assert_eq!(transport.deliver(&b.base, &[again]).unwrap(), 1);
    assert_eq!(b.tm.trust_record(&u).unwrap(), remote);
}

#[test]
fn unreachable_peer_keeps_its_queue() {
    let dead = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        format!("http://{}", l.local_addr().unwrap())
    };
    let a = middleware(5, MiddlewareConfig::default()).with_peers([dead]);
    let u = first_user(&a, 9);
    a.handle_request(&request("p1", &u, SYN_PATIENT, DUA_PUBLIC_HEALTH))
        .unwrap();
    let transport = HttpTransport::new(Duration::from_millis(500)).unwrap();
    let reports = a.propagate_with_retry(&transport, 2, Duration::from_millis(1));
    assert_eq!((reports[0].acked, reports[0].retained), (0, 1));
    assert!(reports[0].error.is_some());
}

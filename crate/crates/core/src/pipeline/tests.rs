use serde_json::json;

use super::*;

/// `out = a + b + bias`, with `b` optional.
struct Add(FilterSpec);

impl Filter for Add {
    fn spec(&self) -> &FilterSpec {
        &self.0
    }

    fn evaluate(&self, args: &EvalArgs<'_>) -> Result<Outputs, PipelineError> {
        let a = args.input("a").and_then(Value::as_number).unwrap_or(0.0);
        let b = args.input("b").and_then(Value::as_number).unwrap_or(0.0);
        let bias = args.number("bias")?;
        Ok([("out".to_owned(), Value::Number(a + b + bias))].into_iter().collect())
    }
}

fn numeric_registry() -> Arc<Registry> {
    let mut r = Registry::empty();
    let bias = ParamSpec {
        name: "bias".into(),
        kind: ParamKind::Number {
            min: Some(-10.0),
            max: Some(10.0),
            exclusive_min: false,
            step: 1.0,
            integer: false,
        },
        default: json!(0.0),
        description: String::new(),
        port: None,
    };
    r.register(Arc::new(Add(FilterSpec {
        name: "add".into(),
        description: String::new(),
        inputs: vec![
            PortSpec {
                name: "a".into(),
                ty: PortType::Number,
                optional: true,
            },
            PortSpec {
                name: "b".into(),
                ty: PortType::Number,
                optional: true,
            },
        ],
        outputs: vec![PortSpec {
            name: "out".into(),
            ty: PortType::Number,
            optional: false,
        }],
        params: vec![bias],
    })));
    Arc::new(r)
}

fn ep(s: &str) -> Endpoint {
    Endpoint::parse(s).unwrap()
}

fn chain(ids: &[&str]) -> Pipeline {
    let mut p = Pipeline::new(numeric_registry());
    for id in ids {
        p.add_node(id, "add").unwrap();
    }
    for w in ids.windows(2) {
        p.connect(ep(&format!("{}:out", w[0])), ep(&format!("{}:a", w[1])))
            .unwrap();
    }
    p
}

fn number(v: Value) -> f64 {
    v.as_number().unwrap()
}

#[test]
fn endpoint_parsing() {
    assert_eq!(Endpoint::parse("a:b:out"), Some(Endpoint::new("a:b", "out")));
    assert_eq!(Endpoint::parse("out"), None);
    assert_eq!(Endpoint::parse(":out"), None);
    assert_eq!(Endpoint::parse("a:"), None);
}

#[test]
fn connect_marks_target_dirty() {
    let mut p = Pipeline::new(numeric_registry());
    p.add_node("A", "add").unwrap();
    p.add_node("B", "add").unwrap();
    p.execute(&ep("A:out"), &[]).unwrap();
    p.execute(&ep("B:out"), &[]).unwrap();
    assert!(p.dirty_nodes().is_empty());
    p.connect(ep("A:out"), ep("B:a")).unwrap();
    assert_eq!(p.dirty_nodes(), ["B"]);
    assert!(p.is_cached("A") && !p.is_cached("B"));
}

#[test]
fn cycle_rejected_atomically() {
    let mut p = chain(&["A", "B"]);
    p.execute(&ep("B:out"), &[]).unwrap();
    let before = p.clone();
    let err = p.connect(ep("B:out"), ep("A:a")).unwrap_err();
    assert_eq!(
        err,
        PipelineError::Cycle {
            from: ep("B:out"),
            to: ep("A:a")
        }
    );
    assert_eq!(p, before);
    assert!(p.dirty_nodes().is_empty());
    assert!(p.connect(ep("A:out"), ep("A:b")).is_err());
}

#[test]
fn type_mismatch() {
    let mut p = Pipeline::default();
    p.add_node("cm", "color_map").unwrap();
    p.add_node("ao", "ssao").unwrap();
    let err = p.connect(ep("cm:image"), ep("ao:radius_pct")).unwrap_err();
    assert_eq!(err.code(), "type_mismatch");
    assert_eq!(p.edges().count(), 0);
}

#[test]
fn unknown_ports_are_named() {
    let mut p = chain(&["A", "B"]);
    let err = p.connect(ep("A:nope"), ep("B:b")).unwrap_err();
    assert!(err.to_string().contains("nope"));
    let err = p.connect(ep("A:out"), ep("B:zzz")).unwrap_err();
    assert_eq!(err.details()["port"], "zzz");
    assert!(p.connect(ep("X:out"), ep("B:b")).is_err());
}

#[test]
fn reconnect_replaces_edge() {
    let mut p = chain(&["A", "B", "C"]);
    let old = p.connect(ep("A:out"), ep("C:a")).unwrap();
    assert_eq!(old, Some(ep("B:out")));
    assert_eq!(p.edges().filter(|e| e.to == ep("C:a")).count(), 1);
}

#[test]
fn set_param_dirties_reachability_only() {
    let mut p = chain(&["A", "B", "C"]);
    p.add_node("side", "add").unwrap();
    p.connect(ep("A:out"), ep("side:a")).unwrap();
    p.execute(&ep("C:out"), &[]).unwrap();
    p.execute(&ep("side:out"), &[]).unwrap();
    p.set_param("B", "bias", &json!(0.0)).unwrap();
    assert_eq!(p.dirty_nodes(), ["B", "C"]);
}

#[test]
fn failed_set_param_changes_nothing() {
    let mut p = chain(&["A", "B"]);
    p.execute(&ep("B:out"), &[]).unwrap();
    assert_eq!(
        p.set_param("A", "bias", &json!(99.0)).unwrap_err().code(),
        "invalid_param"
    );
    assert_eq!(
        p.set_param("A", "nope", &json!(1.0)).unwrap_err().code(),
        "unknown_param"
    );
    assert!(p.dirty_nodes().is_empty());
    assert_eq!(p.node("A").unwrap().params()["bias"], json!(0.0));
}

#[test]
fn memoized_execution() {
    let mut p = chain(&["A", "B", "C"]);
    p.set_param("A", "bias", &json!(1.5)).unwrap();
    assert_eq!(number(p.execute(&ep("C:out"), &[]).unwrap()), 1.5);
    assert_eq!(p.stats().order, ["A", "B", "C"]);
    p.reset_stats();
    p.execute(&ep("C:out"), &[]).unwrap();
    assert_eq!(p.stats().evaluations(), 0);
    p.set_param("B", "bias", &json!(2.0)).unwrap();
    assert_eq!(number(p.execute(&ep("C:out"), &[]).unwrap()), 3.5);
    assert_eq!(p.stats().order, ["B", "C"]);
}

#[test]
fn diamond_evaluates_shared_source_once() {
    let mut p = chain(&["S", "L"]);
    p.add_node("R", "add").unwrap();
    p.add_node("J", "add").unwrap();
    p.set_param("S", "bias", &json!(1.0)).unwrap();
    p.connect(ep("S:out"), ep("R:a")).unwrap();
    p.connect(ep("L:out"), ep("J:a")).unwrap();
    p.connect(ep("R:out"), ep("J:b")).unwrap();
    assert_eq!(number(p.execute(&ep("J:out"), &[]).unwrap()), 2.0);
    assert_eq!(p.stats().count("S"), 1);
    assert_eq!(p.stats().evaluations(), 4);
    assert_eq!(p.stats().order[0], "S");
    assert_eq!(p.stats().order[3], "J");
}

#[test]
fn only_sink_ancestors_run() {
    let mut p = chain(&["A", "B"]);
    p.add_node("other", "add").unwrap();
    p.execute(&ep("B:out"), &[]).unwrap();
    assert!(!p.stats().evaluated().contains("other"));
    assert!(p.is_dirty("other"));
}

#[test]
fn remove_node_drops_edges_and_dirties_descendants() {
    let mut p = chain(&["A", "B", "C"]);
    p.execute(&ep("C:out"), &[]).unwrap();
    p.remove_node("B").unwrap();
    assert_eq!(p.edges().count(), 0);
    assert_eq!(p.dirty_nodes(), ["C"]);
}

#[test]
fn unconnected_mandatory_input_names_node_and_port() {
    let mut p = Pipeline::default();
    p.add_node("aa", "fxaa").unwrap();
    let err = p.execute(&ep("aa:image"), &[]).unwrap_err();
    assert_eq!(
        err,
        PipelineError::Unconnected {
            node: "aa".into(),
            port: "image".into()
        }
    );
    assert!(err.is_execution());
}

#[test]
fn json_roundtrip_demo() {
    let demo = Pipeline::demo();
    let text = demo.to_json_string();
    let back = Pipeline::from_slice(text.as_bytes(), demo.registry().clone()).unwrap();
    assert_eq!(back, demo);
    assert_eq!(back.to_json(), demo.to_json());
    // Every parameter is written out.
    assert_eq!(back.to_json()["nodes"][2]["params"]["bias"], json!(0.025));
}

#[test]
fn structural_equality_ignores_order() {
    let mut a = chain(&["A", "B"]);
    a.add_node("C", "add").unwrap();
    a.connect(ep("A:out"), ep("C:a")).unwrap();
    let mut b = Pipeline::new(numeric_registry());
    for id in ["C", "B", "A"] {
        b.add_node(id, "add").unwrap();
    }
    b.connect(ep("A:out"), ep("C:a")).unwrap();
    b.connect(ep("A:out"), ep("B:a")).unwrap();
    assert_eq!(a, b);
    b.set_param("C", "bias", &json!(1.0)).unwrap();
    assert_ne!(a, b);
}

#[test]
fn json_unknown_filter_named() {
    let payload = json!({"schema": 1, "nodes": [{"id": "x", "type": "Foo"}], "edges": []});
    let err = Pipeline::from_json(&payload, Arc::new(Registry::standard())).unwrap_err();
    assert_eq!(err.root(), &PipelineError::UnknownFilter("Foo".into()));
    assert!(err.to_string().contains("Foo"));
    assert_eq!(err.details()["pointer"], "/nodes/0/type");
}

#[test]
fn json_cycle_rejected() {
    let payload = json!({
        "schema": 1,
        "nodes": [{"id": "A", "type": "add"}, {"id": "B", "type": "add"}],
        "edges": [
            {"from": ["A", "out"], "to": ["B", "a"]},
            {"from": ["B", "out"], "to": ["A", "a"]}
        ]
    });
    let err = Pipeline::from_json(&payload, numeric_registry()).unwrap_err();
    assert_eq!(err.code(), "cycle");
    let d = err.details();
    assert_eq!(d["from"], json!(["B", "out"]));
    assert_eq!(d["to"], json!(["A", "a"]));
    assert_eq!(d["pointer"], "/edges/1");
}

#[test]
fn json_schema_pointers() {
    let reg = numeric_registry();
    let cases = [
        (json!({"nodes": []}), "/schema"),
        (json!({"schema": 2, "nodes": []}), "/schema"),
        (json!({"schema": 1}), "/nodes"),
        (json!({"schema": 1, "nodes": [], "extra": 0}), "/extra"),
        (json!({"schema": 1, "nodes": [{"type": "add"}]}), "/nodes/0/id"),
        (
            json!({"schema": 1, "nodes": [{"id": "A", "type": "add", "params": {"bias": "x"}}]}),
            "/nodes/0/params/bias",
        ),
        (
            json!({"schema": 1, "nodes": [{"id": "A", "type": "add"}, {"id": "A", "type": "add"}]}),
            "/nodes/1/id",
        ),
        (
            json!({"schema": 1, "nodes": [{"id": "A", "type": "add"}], "edges": [{"from": ["A"], "to": ["A", "a"]}]}),
            "/edges/0/from",
        ),
        (
            json!({"schema": 1, "nodes": [{"id": "A", "type": "add"}, {"id": "B", "type": "add"}],
                   "edges": [{"from": ["A", "out"], "to": ["B", "a"]}, {"from": ["A", "out"], "to": ["B", "a"]}]}),
            "/edges/1/to",
        ),
    ];
    for (payload, pointer) in cases {
        let err = Pipeline::from_json(&payload, reg.clone()).unwrap_err();
        assert_eq!(err.details()["pointer"], pointer, "{payload}: {err}");
    }
}

#[test]
fn malformed_bytes() {
    let err = Pipeline::from_slice(b"{not json", numeric_registry()).unwrap_err();
    assert_eq!(err.code(), "schema");
}

use neurodb::envops::{self, StreamRole};
use neurodb::netcore::learn;
use neurodb::{Database, Error, ObjectId, Value};

const ZERO_NET: &str = "
    Create NEUNET (Name) instance XOR-Net(\"x\");
    Add type BPN to XOR-Net;
    InitializeNeuralNet(XOR-Net);
    LayerSize(XOR-Net, Input, 2);
    LayerSize(XOR-Net, Hidden, 1);
    LayerSize(XOR-Net, Output, 1);
    Set LearnRate(XOR-Net) = 4.0;
    Create type testdata (x Real, y Real, z Real);
";

const XOR_ROWS: &str = "Create testdata (x, y, z) instance (0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0);";

fn setup(rows: bool) -> (Database, ObjectId) {
    let mut db = Database::new();
    db.exec(ZERO_NET).unwrap();
    if rows {
        db.exec(XOR_ROWS).unwrap();
    }
    db.exec("Set InputData(XOR-Net) = select x, y from testdata; Set CheckData(XOR-Net) = select z from testdata;")
        .unwrap();
    let net = db.object_named("XOR-Net").unwrap();
    (db, net)
}

#[test]
fn bound_streams_have_query_shape() {
    let (mut db, net) = setup(true);
    let input = envops::stream(&mut db, net, StreamRole::Input).unwrap();
    assert_eq!((input.len(), input.arity()), (4, 2));
    let check = envops::stream(&mut db, net, StreamRole::Check).unwrap();
    assert_eq!((check.len(), check.arity()), (4, 1));
    assert_eq!(check.rows(), [[0.0], [1.0], [1.0], [0.0]]);
}

#[test]
fn bound_streams_follow_the_data() {
    let (mut db, net) = setup(true);
    db.exec("Create testdata (x, y, z) instance (0.5, 0.5, 1);").unwrap();
    assert_eq!(envops::stream(&mut db, net, StreamRole::Input).unwrap().len(), 5);
}

#[test]
fn empty_binding_cannot_train() {
    let (mut db, net) = setup(false);
    assert!(envops::stream(&mut db, net, StreamRole::Input).unwrap().is_empty());
    assert!(matches!(learn(&mut db, net, 1), Err(Error::UnboundData(_))));
    db.exec("Create type predictions (p Real);").unwrap();
    assert_eq!(envops::output_insert(&mut db, net, "predictions", &["p".into()]).unwrap(), 0);
}

#[test]
fn unbound_net_reports_unbound_data() {
    let mut db = Database::new();
    db.exec("Create NEUNET (Name) instance N(\"n\");").unwrap();
    let net = db.object_named("N").unwrap();
    assert!(matches!(envops::stream(&mut db, net, StreamRole::Input), Err(Error::UnboundData(_))));
}

#[test]
fn text_columns_are_rejected() {
    let (mut db, _) = setup(true);
    db.exec("Create type labelled (x Real, tag CharacterString);").unwrap();
    let err = db.exec("Set InputData(XOR-Net) = select x, tag from labelled;").unwrap_err();
    assert!(matches!(err, Error::NonNumericProjection(_)), "{err:?}");
}

#[test]
fn trigger_stores_zero_weight_output() {
    let (mut db, _) = setup(true);
    db.exec(
        "Create type samples (x Real, y Real);
         Create type results (value Real, sample samples);
         Create trigger on samples (x, y) evaluate XOR-Net into results (value);
         Create samples (x, y) instance s1(1, 0), s2(0, 1);",
    )
    .unwrap();
    let results = db.instances_of("results").unwrap();
    assert_eq!(results.len(), 2);
    let s1 = db.object_named("s1").unwrap();
    let s2 = db.object_named("s2").unwrap();
    assert_eq!(db.get_value("value", results[0]).unwrap(), Value::Real(0.5));
    assert_eq!(db.get_value("sample", results[0]).unwrap(), Value::Object(s1));
    assert_eq!(db.get_value("sample", results[1]).unwrap(), Value::Object(s2));
}

#[test]
fn trigger_on_incomplete_row_inserts_nothing() {
    let (mut db, _) = setup(true);
    db.exec(
        "Create type samples (x Real, y Real);
         Create type results (value Real);
         Create trigger on samples (x, y) evaluate XOR-Net into results (value);",
    )
    .unwrap();
    let err = db.exec("Create samples (x) instance (1);").unwrap_err();
    assert!(matches!(err, Error::ArityMismatch(_)), "{err:?}");
    assert!(db.instances_of("samples").unwrap().is_empty());
    assert!(db.instances_of("results").unwrap().is_empty());
}

#[test]
fn trigger_into_its_own_type_is_rejected() {
    let (mut db, _) = setup(true);
    db.exec("Create type samples (x Real, y Real, value Real);").unwrap();
    let err = db.exec("Create trigger on samples (x, y) evaluate XOR-Net into samples (value);").unwrap_err();
    assert!(matches!(err, Error::Recursion(_)), "{err:?}");
}

#[test]
fn output_insert_writes_one_row_per_input() {
    let (mut db, net) = setup(true);
    learn(&mut db, net, 10).unwrap();
    db.exec("Create type predictions (p Real);").unwrap();
    assert_eq!(envops::output_insert(&mut db, net, "predictions", &["p".into()]).unwrap(), 4);
    assert_eq!(db.instances_of("predictions").unwrap().len(), 4);
    let err = envops::output_insert(&mut db, net, "predictions", &["q".into()]).unwrap_err();
    assert!(matches!(err, Error::TypeMismatch(_)), "{err:?}");
    assert_eq!(db.instances_of("predictions").unwrap().len(), 4);
}

#[test]
fn insert_statement_matches_output_insert() {
    let (mut db, _) = setup(true);
    db.exec("Create type predictions (p Real); Insert OutputData(XOR-Net) into predictions (p);").unwrap();
    let p = db.query("select p from predictions").unwrap();
    assert_eq!(p.to_reals().unwrap(), vec![0.5; 4]);
}

#[test]
fn returned_stream_is_reevaluated() {
    let (mut db, net) = setup(true);
    let first = envops::output_return(&mut db, net).unwrap().into_stream().unwrap();
    let again = envops::output_return(&mut db, net).unwrap().into_stream().unwrap();
    assert_eq!(first, again);
    assert_eq!(first.len(), 4);
    db.exec("Set Weight(XOR-Net) = 1.0;").unwrap();
    let changed = envops::output_return(&mut db, net).unwrap().into_stream().unwrap();
    assert_ne!(first, changed);
    assert_eq!(changed.rows()[0], [neurodb::netcore::sigmoid(neurodb::netcore::sigmoid(0.0))]);
}

use sdnr::{count_radial, Network};

fn case(name: &str) -> Network {
    Network::from_file(format!("{}/../../cases/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

#[test]
fn ieee33_radial_configuration_count() {
    let net = case("ieee33.json");
    assert_eq!(net.n_buses(), 33);
    assert_eq!(net.n_branches(), 37);
    let t0 = std::time::Instant::now();
    let count = count_radial(&net);
    println!("33-bus enumeration: {count} configs in {:?}", t0.elapsed());
    assert_eq!(count, 33_913);
}

#[test]
fn ieee123_radial_configuration_count() {
    let net = case("ieee123.json");
    assert_eq!(net.n_buses(), 123);
    assert_eq!(net.n_branches(), 126);
    let t0 = std::time::Instant::now();
    let count = count_radial(&net);
    println!("123-bus enumeration: {count} configs in {:?}", t0.elapsed());
    assert_eq!(count, 42_658);
}

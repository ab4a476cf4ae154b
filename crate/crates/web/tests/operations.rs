use serde_json::Value;

use cmc_foliate_web::{expand_json, foliate_json, moments_json};

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn moment_constant_in_two_dimensions() {
    let v = parse(moments_json(2, 6).unwrap());
    // 2 w_2 / (4 w_3) = 2 pi / (16 pi / 3)
    assert!((v["c_n"].as_f64().unwrap() - 0.375).abs() < 1e-13);
    assert!(v["deviation"].as_f64().unwrap().abs() < 1e-13);
    assert!(moments_json(2, 11).is_err());
    assert!(moments_json(1, 6).is_err());
}

#[test]
fn expansion_of_an_umbilic_point() {
    let v = parse(expand_json(1.0, 1.0, 1.0, 0.0, 0.0).unwrap());
    let first = &v["entries"][0];
    assert_eq!((first["row"].as_u64(), first["col"].as_u64()), (Some(0), Some(0)));
    let coeff = |name: &str| {
        first["terms"].as_array().unwrap().iter().find(|t| t["monomial"] == name).map(|t| t["coefficient"].as_f64().unwrap())
    };
    // (1 - t/2)^(-2)
    assert_eq!(coeff("1"), Some(1.0));
    assert_eq!(coeff("t"), Some(1.0));
    assert_eq!(coeff("t^2"), Some(0.75));
    assert_eq!(v["entries"][1]["terms"].as_array().unwrap().len(), 0);
    // g^tt = 1
    let tt = &v["entries"][5];
    assert_eq!(tt["row"], 2);
    assert_eq!(tt["terms"].as_array().unwrap().len(), 1);
}

#[test]
fn small_foliation() {
    let v = parse(foliate_json(1.0, 1.0, 1.0, 0.15, 3, 6).unwrap());
    let leaves = v["leaves"].as_array().unwrap();
    assert_eq!(leaves.len(), 3);
    for leaf in leaves {
        assert_eq!(leaf["converged"], true);
        let r = leaf["r"].as_f64().unwrap();
        let section = leaf["section"].as_array().unwrap();
        assert_eq!(section.len(), 49);
        let top = section[24].as_array().unwrap();
        assert!(top[0].as_f64().unwrap().abs() < 1e-12);
        assert!((top[1].as_f64().unwrap() - r).abs() < 0.1 * r);
        assert_eq!(section[0][1].as_f64().unwrap(), 0.0);
    }
    assert!(v["det_min"].as_f64().unwrap() > 0.0);
    assert!(v["failure"].is_null());
    assert!(foliate_json(1.0, 1.0, 1.0, 0.15, 1, 6).is_err());
    assert!(foliate_json(1.0, 0.0, 0.0, 0.15, 3, 6).is_err());
}

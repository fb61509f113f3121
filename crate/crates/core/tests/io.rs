use kahler_core::io::{read_grid_function, read_grid_slice, write_grid_function, write_grid_slice};
use kahler_core::{Grid, GridFunction, GridSlice, KahlerCoefficient};
use num_complex::Complex64;
use proptest::prelude::*;

#[test]
fn duplicate_rows_are_rejected() {
    let g = Grid::torus(4).unwrap();
    let v = GridSlice::from_fn(g, |z| z.re).unwrap();
    let mut buf = Vec::new();
    write_grid_slice(&mut buf, &v, None, &[]).unwrap();
    let mut text = String::from_utf8(buf).unwrap();
    let last = text.lines().last().unwrap().to_string();
    text.push_str(&last);
    text.push('\n');
    assert!(read_grid_slice(text.as_bytes()).is_err());
}

#[test]
fn header_is_required() {
    assert!(read_grid_slice("k,i,j,t,x,y,value\n0,0,0,1,0,0,1\n".as_bytes()).is_err());
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.csv");
    let g = Grid::patch(Complex64::new(0.0, 0.0), 1.0, 6).unwrap();
    let u = GridFunction::from_fn(g, 3, false, |t, z| t * z.norm_sqr() - 1.0 / 3.0).unwrap();
    write_grid_function(std::fs::File::create(&path).unwrap(), &u, None, &["patch".into()]).unwrap();
    let (back, header) = read_grid_function(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(back, u);
    assert_eq!(header.nt, 3);
    assert!(header.omega11.is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn values_round_trip_bit_for_bit(values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 2 * 36), w in 0.01f64..10.0) {
        let g = Grid::torus(6).unwrap();
        let u = GridFunction::new(g, 2, values, false).unwrap();
        let mut buf = Vec::new();
        write_grid_function(&mut buf, &u, Some(KahlerCoefficient::new(w).unwrap()), &[]).unwrap();
        let (back, header) = read_grid_function(buf.as_slice()).unwrap();
        prop_assert_eq!(back.values().iter().map(|x| x.to_bits()).collect::<Vec<_>>(), u.values().iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(header.omega11.unwrap().value(), w);
    }
}

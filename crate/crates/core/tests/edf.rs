mod common;

use indrnn_eeg::data::{digital_to_physical, parse_edf, parse_edf_header, physical_to_digital, write_edf};
use indrnn_eeg::numerics::SeededRng;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn write_then_parse_is_identity(seed in any::<u64>()) {
        let file = common::random_edf(&mut SeededRng::new(seed));
        let bytes = write_edf(&file).unwrap();
        let back = parse_edf(&bytes).unwrap();
        prop_assert_eq!(&back, &file);
        prop_assert_eq!(write_edf(&back).unwrap(), bytes.clone());
        prop_assert_eq!(parse_edf_header(&bytes[..file.header.header_bytes]).unwrap(), file.header.clone());
    }

    #[test]
    fn calibration_endpoints_are_exact(seed in any::<u64>()) {
        let file = common::random_edf(&mut SeededRng::new(seed));
        for s in &file.header.signals {
            let ends = [s.digital_min as i16, s.digital_max as i16];
            let phys = digital_to_physical(&ends, s);
            prop_assert_eq!(phys, vec![s.physical_min as f32, s.physical_max as f32]);
            prop_assert_eq!(physical_to_digital(&[s.physical_min as f32, s.physical_max as f32], s), ends.to_vec());
        }
    }
}

#[test]
fn truncated_file_is_rejected() {
    let file = common::random_edf(&mut SeededRng::new(3));
    let bytes = write_edf(&file).unwrap();
    assert!(parse_edf(&bytes[..bytes.len() - 1]).is_err());
    assert!(parse_edf(&bytes[..100]).is_err());
}

#![no_main]

use libfuzzer_sys::fuzz_target;
use qmri_core::formats::TensorFile;

fuzz_target!(|data: &[u8]| {
    if let Ok(file) = TensorFile::decode(data) {
        let again = TensorFile::decode(&file.encode()).expect("re-encoded file decodes");
        assert_eq!(again.dims(), file.dims());
        assert_eq!(again.dtype(), file.dtype());
        let _ = file.to_image();
        let _ = file.to_tensor();
        let _ = file.to_complex_images();
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use qmri_core::formats::Checkpoint;
use qmri_core::pipeline::from_checkpoint;

fuzz_target!(|data: &[u8]| {
    if let Ok(ckpt) = Checkpoint::decode(data) {
        let bytes = ckpt.encode().expect("decoded checkpoint re-encodes");
        Checkpoint::decode(&bytes).expect("re-encoded checkpoint decodes");
        let _ = from_checkpoint(&ckpt);
    }
});

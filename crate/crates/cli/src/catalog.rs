//! Scenario catalog shipped with the binary.

pub struct Entry {
    pub name: &'static str,
    pub text: &'static str,
}

macro_rules! entry {
    ($name:literal) => {
        Entry {
            name: $name,
            text: include_str!(concat!("../scenarios/", $name, ".toml")),
        }
    };
}

pub const CATALOG: &[Entry] = &[
    entry!("fig11_pi"),
    entry!("fig11_ladrc"),
    entry!("fig11_aladrc"),
    entry!("fig12_sweep"),
    entry!("fig12_pi_sweep"),
    entry!("fig13_voltage_sweep"),
    entry!("fig15_pi_loadstep"),
    entry!("fig16_aladrc_loadstep"),
    entry!("fig17_full"),
    entry!("synthetic_zero_duty"),
    entry!("synthetic_identical_hdcsc"),
    entry!("synthetic_module_drop"),
    entry!("synthetic_single_module"),
];

pub fn find(name: &str) -> Option<&'static Entry> {
    CATALOG.iter().find(|e| e.name == name)
}

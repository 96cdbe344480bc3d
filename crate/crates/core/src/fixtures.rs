//! Shared test sheets for the demonstration dataset.

use crate::dvl::DerivedVariableSpec;
use crate::value::VariableType;

pub const VARS: &str = "\
variable,label,variableType,databaseStart,variableStart
sex,Sex,categorical,paquid,paquid::male
MMSE_category,MMSE category,categorical,paquid,paquid::MMSE
CEP_bin,Primary school,categorical,paquid,paquid::CEP
MMSE-CEP,MMSE and CEP,categorical,paquid,\"DerivedVar::[MMSE_category, CEP_bin]\"
";

pub const DETAILS: &str = "\
variable,typeEnd,typeStart,databaseStart,variableStart,recEnd,catLabel,recStart
sex,categorical,categorical,paquid,paquid::male,Female,Female,0
sex,categorical,categorical,paquid,paquid::male,Male,Male,1
MMSE_category,categorical,continuous,paquid,paquid::MMSE,NA::b,missing,else
MMSE_category,categorical,continuous,paquid,paquid::MMSE,severe cognitive impairment,,\"[0,9]\"
MMSE_category,categorical,continuous,paquid,paquid::MMSE,moderate cognitive impairment,,\"[10,17]\"
MMSE_category,categorical,continuous,paquid,paquid::MMSE,mild cognitive impairment,,\"[18,23]\"
MMSE_category,categorical,continuous,paquid,paquid::MMSE,normal,,\"[24,30]\"
CEP_bin,categorical,categorical,paquid,paquid::CEP,non-graduated,,0
CEP_bin,categorical,categorical,paquid,paquid::CEP,graduated,,1
MMSE-CEP,categorical,categorical,paquid,\"DerivedVar::[MMSE_category, CEP_bin]\",Func::MMSECEPfunction,,else
";

pub fn mmse_cep() -> DerivedVariableSpec {
    DerivedVariableSpec {
        name: "MMSE-CEP".into(),
        components: vec!["MMSE_category".into(), "CEP_bin".into()],
        function_name: "MMSECEPfunction".into(),
        function_body: "MMSE_category ++ \"_\" ++ CEP_bin".into(),
        output_type: VariableType::Categorical,
        notes: None,
    }
}

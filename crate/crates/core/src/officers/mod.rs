//! Person-level view of officer records: identity resolution, demographics,
//! location, first-time status and the corporate elite.

mod demographics;
mod elite;
mod experience;
mod identity;
mod levenshtein;
mod region;

pub use demographics::{compute_age, infer_gender, DemographicsError, Gender, GenderLabel, GenderProvider, GenderProviderTable};
pub use elite::{
    classify_first_time, elite_share_sweep, elite_table, is_corporate_elite, EliteTableRow, FirmBucket, OfficerHistory,
};
pub use experience::{
    experience_samples, industry_experience, nearest_rank_quantile, winsorise, ExperienceCell, ExperienceSample, Period,
};
pub use identity::{resolve_identities, Appointment, MatchProvenance, PersonKey, ResolvedPerson};
pub use levenshtein::{levenshtein, levenshtein_within};
pub use region::{map_region, PostcodeRegions, Region};

/// Fills in gender from the first forename and region from the postcode.
pub fn enrich_persons(persons: &mut [ResolvedPerson], providers: &[&dyn GenderProvider], regions: &PostcodeRegions) {
    for p in persons.iter_mut() {
        p.gender = infer_gender(&p.key.first_forename, providers);
        p.region = p
            .postcode
            .as_deref()
            .map_or(Region::Excluded, |pc| regions.map_region(pc));
    }
}

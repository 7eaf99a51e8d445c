//! Writes the bundled demo survey: 801 interviews across two countries,
//! 55 variables matching `config/schema.toml`, a handful of planted
//! wellbeing effects (including one newspapers × rainfall interaction),
//! and a light sprinkling of missing responses.
//!
//! Regenerate with `cargo run -p surveyboost --example generate_demo`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 801;
const SEED: u64 = 801;

const MISS_PREDICTOR: f64 = 0.002;
const MISS_OUTCOME: f64 = 0.01;
const MISS_COUNTRY: f64 = 0.004;

fn likert_with(rng: &mut ChaCha8Rng, p_top2: f64) -> i64 {
    if rng.gen_bool(p_top2) {
        rng.gen_range(4..=5)
    } else {
        rng.gen_range(1..=3)
    }
}

fn yes_no(rng: &mut ChaCha8Rng, p_yes: f64) -> &'static str {
    if rng.gen_bool(p_yes) {
        "yes"
    } else {
        "no"
    }
}

fn logistic_noise(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.gen_range(1e-9..1.0 - 1e-9);
    (u / (1.0 - u)).ln()
}

fn main() {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "data/demo_survey.csv".into());
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);

    let header = [
        "id",
        "financial_wellbeing",
        "country",
        "water_access",
        "soil_quality",
        "land_degradation",
        "rainfall_variability",
        "irrigation_share",
        "forest_nearby",
        "pasture_access",
        "education_secondary",
        "literacy",
        "farm_experience_years",
        "household_size",
        "agricultural_training",
        "generations_farming",
        "health_status",
        "off_farm_skills",
        "adult_children_nearby",
        "trust_neighbors",
        "trust_government",
        "cooperative_member",
        "community_meetings",
        "use_of_newspapers",
        "use_of_radio",
        "use_of_television",
        "mobile_phone_groups",
        "extension_contact",
        "farm_size_ha",
        "livestock_owned",
        "crop_diversity",
        "mechanization",
        "storage_facilities",
        "distance_to_market_km",
        "slope_steep",
        "region",
        "off_farm_income",
        "savings_account",
        "access_to_credit",
        "debt_burden",
        "farm_income_share",
        "owns_land_title",
        "market_sales_share",
        "income_diversity",
        "insurance_any",
        "rainfall_decrease",
        "temperature_increase",
        "drought_experienced",
        "flood_experienced",
        "crop_loss_damage",
        "livestock_loss_damage",
        "income_loss_climate",
        "infrastructure_damage",
        "gender",
        "age",
        "married",
        "primary_crop",
    ];

    if let Some(dir) = std::path::Path::new(&out).parent() {
        std::fs::create_dir_all(dir).expect("create output directory");
    }
    let mut w = csv::Writer::from_path(&out).expect("open output file");
    w.write_record(header).expect("write header");

    for id in 1..=N {
        let tn = rng.gen_bool(0.5);
        let country = if tn { "Tunisia" } else { "Chile" };

        let water_access = likert_with(&mut rng, 0.45);
        let soil_quality = likert_with(&mut rng, 0.5);
        let land_degradation = likert_with(&mut rng, if tn { 0.5 } else { 0.35 });
        let rainfall_variability = likert_with(&mut rng, if tn { 0.55 } else { 0.4 });
        let irrigation_share: f64 = rng.gen_range(0.0..1.0);
        let forest_nearby = yes_no(&mut rng, if tn { 0.25 } else { 0.5 });
        let pasture_access = yes_no(&mut rng, 0.45);

        let education_secondary = yes_no(&mut rng, if tn { 0.4 } else { 0.55 });
        let literacy = yes_no(&mut rng, 0.8);
        let farm_experience_years = rng.gen_range(1..=45);
        let household_size = rng.gen_range(1..=10);
        let agricultural_training = yes_no(&mut rng, 0.35);
        let generations_farming = rng.gen_range(0..=6);
        let health_status = likert_with(&mut rng, 0.5);
        let off_farm_skills = yes_no(&mut rng, 0.4);
        let adult_children_nearby = yes_no(&mut rng, 0.5);

        let trust_neighbors = likert_with(&mut rng, 0.45);
        let trust_government = likert_with(&mut rng, 0.3);
        let cooperative_member = yes_no(&mut rng, if tn { 0.5 } else { 0.35 });
        let community_meetings = rng.gen_range(0..=8);
        let use_of_newspapers = likert_with(&mut rng, 0.4);
        let use_of_radio = likert_with(&mut rng, 0.6);
        let use_of_television = likert_with(&mut rng, 0.55);
        let mobile_phone_groups = yes_no(&mut rng, 0.45);
        let extension_contact = yes_no(&mut rng, 0.3);

        let farm_size_ha: f64 = rng.gen_range(0.5..30.0);
        let livestock_owned = rng.gen_range(0..=40);
        let crop_diversity = rng.gen_range(1..=7);
        let mechanization = yes_no(&mut rng, if tn { 0.3 } else { 0.5 });
        let storage_facilities = yes_no(&mut rng, 0.4);
        let distance_to_market_km: f64 = rng.gen_range(0.5..40.0);
        let slope_steep = yes_no(&mut rng, 0.3);
        let region = ["north", "center", "south", "coast"][rng.gen_range(0..4)];

        let off_farm_income = yes_no(&mut rng, 0.45);
        let savings_account = yes_no(&mut rng, if tn { 0.35 } else { 0.5 });
        let access_to_credit = yes_no(&mut rng, 0.5);
        let debt_burden = likert_with(&mut rng, 0.4);
        let farm_income_share: f64 = rng.gen_range(0.0..1.0);
        let owns_land_title = yes_no(&mut rng, 0.6);
        let market_sales_share: f64 = rng.gen_range(0.0..1.0);
        let income_diversity = rng.gen_range(0..=5);
        let insurance_any = yes_no(&mut rng, 0.25);

        let rainfall_decrease = likert_with(&mut rng, if tn { 0.55 } else { 0.4 });
        let temperature_increase = likert_with(&mut rng, 0.5);
        let drought_experienced = yes_no(&mut rng, if tn { 0.45 } else { 0.25 });
        let flood_experienced = yes_no(&mut rng, 0.2);

        let crop_loss_damage = likert_with(&mut rng, if tn { 0.45 } else { 0.35 });
        let livestock_loss_damage = likert_with(&mut rng, 0.3);
        let income_loss_climate = likert_with(&mut rng, 0.4);
        let infrastructure_damage = yes_no(&mut rng, 0.2);

        let gender = if rng.gen_bool(0.45) { "female" } else { "male" };
        let age = rng.gen_range(22..=80);
        let married = yes_no(&mut rng, 0.7);
        let primary_crop = ["cereals", "vegetables", "fruit", "mixed"][rng.gen_range(0..4)];

        // wellbeing from the planted effects, on the encoded 0/1 scale
        let ind = |b: bool| b as u8 as f64;
        let news = ind(use_of_newspapers >= 4);
        let rain = ind(rainfall_decrease >= 4);
        let eta = 0.25 + 0.9 * news - 0.8 * rain + 0.8 * news * rain
            + 0.7 * ind(access_to_credit == "yes")
            - 0.6 * ind(crop_loss_damage >= 4)
            + 0.5 * ind(education_secondary == "yes")
            - 0.4 * ind(tn)
            + 0.3 * ind(trust_neighbors >= 4)
            - 0.35 * ind(drought_experienced == "yes");
        let latent = eta + logistic_noise(&mut rng);
        let wellbeing = if latent > 2.0 {
            "very well"
        } else if latent > 0.6 {
            "well"
        } else if latent > -0.6 {
            "neutral"
        } else if latent > -2.0 {
            "not well"
        } else {
            "not at all well"
        };

        let mut cells: Vec<String> = vec![id.to_string()];
        let blank = |rng: &mut ChaCha8Rng, p: f64, v: String| -> String {
            if rng.gen_bool(p) {
                String::new()
            } else {
                v
            }
        };
        cells.push(blank(&mut rng, MISS_OUTCOME, wellbeing.to_string()));
        cells.push(blank(&mut rng, MISS_COUNTRY, country.to_string()));
        for v in [
            water_access.to_string(),
            soil_quality.to_string(),
            land_degradation.to_string(),
            rainfall_variability.to_string(),
            format!("{irrigation_share:.2}"),
            forest_nearby.to_string(),
            pasture_access.to_string(),
            education_secondary.to_string(),
            literacy.to_string(),
            farm_experience_years.to_string(),
            household_size.to_string(),
            agricultural_training.to_string(),
            generations_farming.to_string(),
            health_status.to_string(),
            off_farm_skills.to_string(),
            adult_children_nearby.to_string(),
            trust_neighbors.to_string(),
            trust_government.to_string(),
            cooperative_member.to_string(),
            community_meetings.to_string(),
            use_of_newspapers.to_string(),
            use_of_radio.to_string(),
            use_of_television.to_string(),
            mobile_phone_groups.to_string(),
            extension_contact.to_string(),
            format!("{farm_size_ha:.1}"),
            livestock_owned.to_string(),
            crop_diversity.to_string(),
            mechanization.to_string(),
            storage_facilities.to_string(),
            format!("{distance_to_market_km:.1}"),
            slope_steep.to_string(),
            region.to_string(),
            off_farm_income.to_string(),
            savings_account.to_string(),
            access_to_credit.to_string(),
            debt_burden.to_string(),
            format!("{farm_income_share:.2}"),
            owns_land_title.to_string(),
            format!("{market_sales_share:.2}"),
            income_diversity.to_string(),
            insurance_any.to_string(),
            rainfall_decrease.to_string(),
            temperature_increase.to_string(),
            drought_experienced.to_string(),
            flood_experienced.to_string(),
            crop_loss_damage.to_string(),
            livestock_loss_damage.to_string(),
            income_loss_climate.to_string(),
            infrastructure_damage.to_string(),
            gender.to_string(),
            age.to_string(),
            married.to_string(),
            primary_crop.to_string(),
        ] {
            cells.push(blank(&mut rng, MISS_PREDICTOR, v));
        }
        w.write_record(&cells).expect("write row");
    }
    w.flush().expect("flush output");
    println!("wrote {N} rows to {out}");
}

//! The 30-class subset of CLINC150 behind the BNIntent30 corpus, with its
//! published per-class split sizes after translation and cleaning.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClassRow {
    /// Label as spelled in CLINC150.
    pub label: &'static str,
    pub display: &'static str,
    pub domain: &'static str,
    pub train: usize,
    pub test: usize,
    pub validation: usize,
}

impl ClassRow {
    pub const fn total(&self) -> usize {
        self.train + self.test + self.validation
    }
}

const fn row(
    label: &'static str,
    display: &'static str,
    domain: &'static str,
    train: usize,
    test: usize,
    validation: usize,
) -> ClassRow {
    ClassRow {
        label,
        display,
        domain,
        train,
        test,
        validation,
    }
}

pub const CLASSES: [ClassRow; 30] = [
    row("calendar", "CALENDER", "HOME", 100, 30, 20),
    row("what_song", "WHAT SONG", "HOME", 100, 30, 20),
    row("play_music", "PLAY MUSIC", "HOME", 99, 30, 19),
    row("next_song", "NEXT SONG", "HOME", 98, 30, 20),
    row("todo_list", "TODO LIST", "HOME", 98, 27, 20),
    row("reminder", "REMAINDER", "HOME", 100, 30, 20),
    row("date", "DATE", "UTILITY", 100, 30, 20),
    row("time", "TIME", "UTILITY", 100, 30, 20),
    row("alarm", "ALARM", "UTILITY", 96, 30, 20),
    row("spelling", "SPELLING", "UTILITY", 100, 30, 20),
    row("make_call", "MAKE CALL", "UTILITY", 90, 28, 20),
    row("calculator", "CALCULATOR", "UTILITY", 99, 27, 20),
    row("weather", "WEATHER", "UTILITY", 100, 30, 19),
    row("thank_you", "THANK YOU", "SMALL TALK", 100, 30, 20),
    row("goodbye", "GOODBYE", "SMALL TALK", 95, 30, 20),
    row(
        "how_old_are_you",
        "HOW OLD ARE YOU",
        "SMALL TALK",
        100,
        30,
        20,
    ),
    row("tell_joke", "TELL JOKE", "SMALL TALK", 100, 30, 20),
    row("fun_fact", "FUN FACT", "SMALL TALK", 98, 30, 19),
    row(
        "where_are_you_from",
        "WHERE ARE YOU FROM",
        "SMALL TALK",
        100,
        30,
        20,
    ),
    row(
        "what_are_your_hobbies",
        "WHAT ARE YOUR HOBIES",
        "SMALL TALK",
        100,
        30,
        20,
    ),
    row(
        "what_is_your_name",
        "WHAT IS YOUR NAME",
        "SMALL TALK",
        99,
        30,
        20,
    ),
    row("change_user_name", "CHANGE USER NAME", "META", 100, 30, 20),
    row("change_volume", "CHANGE VOLUME", "META", 94, 28, 20),
    row("no", "NO", "META", 94, 29, 20),
    row("repeat", "REPEAT", "META", 99, 30, 20),
    row("yes", "YES", "META", 97, 30, 20),
    row(
        "current_location",
        "CURRENT LOCATION",
        "AUTO AND COMMUTE",
        99,
        29,
        18,
    ),
    row("traffic", "TRAFFIC", "AUTO AND COMMUTE", 97, 28, 20),
    row("distance", "DISTANCE", "AUTO AND COMMUTE", 100, 30, 20),
    row("translate", "TRANSLATE", "TRAVEL", 100, 30, 20),
];

pub const TRAIN_SIZE: usize = 2952;
pub const VALIDATION_SIZE: usize = 595;
pub const TEST_SIZE: usize = 886;

pub fn class_labels() -> Vec<&'static str> {
    CLASSES.iter().map(|c| c.label).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_sums_match_split_sizes() {
        assert_eq!(CLASSES.iter().map(|c| c.train).sum::<usize>(), TRAIN_SIZE);
        assert_eq!(
            CLASSES.iter().map(|c| c.validation).sum::<usize>(),
            VALIDATION_SIZE
        );
        assert_eq!(CLASSES.iter().map(|c| c.test).sum::<usize>(), TEST_SIZE);
        assert_eq!(CLASSES.iter().map(ClassRow::total).sum::<usize>(), 4433);
    }

    #[test]
    fn spot_rows() {
        let make_call = CLASSES.iter().find(|c| c.label == "make_call").unwrap();
        assert_eq!(
            (
                make_call.train,
                make_call.test,
                make_call.validation,
                make_call.total()
            ),
            (90, 28, 20, 138)
        );
        assert_eq!(CLASSES[0].total(), 150);
    }

    #[test]
    fn labels_unique() {
        let mut l = class_labels();
        l.sort_unstable();
        l.dedup();
        assert_eq!(l.len(), 30);
    }
}

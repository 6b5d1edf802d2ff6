//! Stems checked against a reference Porter implementation (the C variant
//! with the short-word guard and the `bli`/`logi` rules).

use zsrank::index::porter::stem;

const HAND_PICKED: &[(&str, &str)] = &[
    ("coronavirus", "coronaviru"), ("related", "relat"), ("deaths", "death"), ("caresses", "caress"),
    ("ponies", "poni"), ("ties", "ti"), ("caress", "caress"), ("cats", "cat"), ("feed", "feed"),
    ("agreed", "agre"), ("plastered", "plaster"), ("bled", "bled"), ("motoring", "motor"),
    ("sing", "sing"), ("conflated", "conflat"), ("troubled", "troubl"), ("sized", "size"),
    ("hopping", "hop"), ("tanned", "tan"), ("falling", "fall"), ("hissing", "hiss"),
    ("fizzed", "fizz"), ("failing", "fail"), ("filing", "file"), ("happy", "happi"), ("sky", "sky"),
    ("relational", "relat"), ("conditional", "condit"), ("rational", "ration"),
    ("valenci", "valenc"), ("hesitanci", "hesit"), ("digitizer", "digit"),
    ("conformabli", "conform"), ("radicalli", "radic"), ("differentli", "differ"),
    ("vileli", "vile"), ("analogousli", "analog"), ("vietnamization", "vietnam"),
    ("predication", "predic"), ("operator", "oper"), ("feudalism", "feudal"),
    ("decisiveness", "decis"), ("hopefulness", "hope"), ("callousness", "callous"),
    ("formaliti", "formal"), ("sensitiviti", "sensit"), ("sensibiliti", "sensibl"),
    ("triplicate", "triplic"), ("formative", "form"), ("formalize", "formal"),
    ("electriciti", "electr"), ("electrical", "electr"), ("hopeful", "hope"), ("goodness", "good"),
    ("revival", "reviv"), ("allowance", "allow"), ("inference", "infer"), ("airliner", "airlin"),
    ("gyroscopic", "gyroscop"), ("adjustable", "adjust"), ("defensible", "defens"),
    ("irritant", "irrit"), ("replacement", "replac"), ("adjustment", "adjust"),
    ("dependent", "depend"), ("adoption", "adopt"), ("homologou", "homolog"),
    ("communism", "commun"), ("activate", "activ"), ("angulariti", "angular"),
    ("homologous", "homolog"), ("effective", "effect"), ("bowdlerize", "bowdler"),
    ("probate", "probat"), ("rate", "rate"), ("cease", "ceas"), ("controll", "control"),
    ("roll", "roll"), ("generalization", "gener"), ("oscillators", "oscil"), ("vaccine", "vaccin"),
    ("vaccines", "vaccin"), ("vaccination", "vaccin"), ("trial", "trial"), ("trials", "trial"),
    ("respiratory", "respiratori"), ("syndrome", "syndrom"), ("infection", "infect"),
    ("infections", "infect"), ("transmission", "transmiss"), ("as", "as"), ("is", "is"),
    ("a", "a"), ("by", "by"), ("sars", "sar"), ("cov", "cov"), ("covid19", "covid19"),
    ("hydroxychloroquine", "hydroxychloroquin"), ("ace2", "ace2"), ("receptors", "receptor"),
    ("masks", "mask"), ("possibli", "possibl"), ("analogi", "analog"),
    ("archaeologi", "archaeolog"), ("sensibli", "sensibl"), ("humbli", "humbl"), ("dying", "dy"),
    ("skies", "ski"), ("news", "new"), ("proceed", "proce"), ("succeed", "succe"), ("spied", "spi"),
    ("died", "di"), ("flies", "fli"),
];

#[test]
fn hand_picked_words() {
    for (word, expected) in HAND_PICKED {
        assert_eq!(stem(word), *expected, "stem({word})");
    }
}

#[test]
fn reference_vocabulary() {
    let fixture = include_str!("fixtures/porter_vocab.tsv");
    let mut mismatches = Vec::new();
    for line in fixture.lines() {
        let (word, expected) = line.split_once('\t').unwrap();
        let got = stem(word);
        if got != expected {
            mismatches.push(format!("{word}: got {got}, want {expected}"));
        }
    }
    assert!(mismatches.is_empty(), "{} mismatches:\n{}", mismatches.len(), mismatches.join("\n"));
}

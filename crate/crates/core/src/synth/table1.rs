//! Validated term hit counts per context and dimension, as `pattern (count); ...`.

pub const POST_EXPERIENCE: &str = "feel* (146); emotion* (113); experience* (75); care* (31); hope* (27); desire* (20); enjoy* (18); fear* (16); happy (16); sad* (15); patient* (14); calm (12); empath* (12); fascinat* (12); hurt* (12); concern* (11); content (11); lonely (11); affection (9); surprise* (9); honor (8); interested (8); crave* (7); devout* (7); tired (7); inspired (6); mood (6); afraid (5); eager* (5); perceive* (5); solace (5); aspir* (4); confident (4); excited (4); glad (4); grief (4); joy* (4); pain (4); sorry (4); strong (4); thrilled (4); worried (4); admir* (3); caring (3); clever (3); comfortable (3); motivation (3); passion (3); scared (3); shame (3); angry (2); annoyed (2); anxiety (2); awe (2); compassion (2); daring (2); digni* (2); discomfort (2); hunger (2); inspiration (2); lively (2); miser* (2); nervous (2); perception (2); pride* (2); proud (2); rage (2); relief* (2); serene (2); suffer* (2); upset (2); wise (2); absorbed (1); advers* (1); aggressive (1); alarmed (1); amuse* (1); anger (1); appetite (1); apprehensive (1); astounded (1); attracted (1); avid (1); blush* (1); bold (1); brave (1); cheerful (1); contentious (1); cynical (1); dedicated (1); delight* (1); disdain* (1); disgust* (1); distress* (1); earnest (1); enthusiastic (1); frustrated (1); horrified (1); hostile (1); jovial (1); keen (1); mad (1); modest (1); obsess* (1); pleasure (1); poised (1); regret* (1); relaxed (1); satisfaction (1); shocked (1); shy (1); sorrow* (1); temper (1); wound* (1)";

pub const CHAT_EXPERIENCE: &str = "feel* (60); hope* (18); enjoy* (15); care* (13); happy (8); emotion* (4); strong (3); desire* (2); eager* (2); experience* (2); frustrated (2); mad (2); patient* (2); proud (2); surprise* (2); admir* (1); blush* (1); comfortable (1); concern* (1); crave* (1); delight* (1); empath* (1); excited (1); fascinat* (1); fear* (1); frightened (1); glad (1); hurt* (1); inspiration (1); lonely (1); miser* (1); sad* (1); satisfied (1); scared (1); trembling (1)";

pub const POST_AGENCY: &str = "think* (76); understand* (75); love* (70); imagin* (44); intelligen* (42); thought* (42); believe* (38); inten* (36); memory (35); plan* (35); aware* (33); decide* (31); communicat* (28); conscious* (25); prefer* (25); remembers (25); reason* (23); recogni* (22); goal* (21); control (20); forget* (20); purpose (19); realize* (19); mental* (18); accept* (17); predict* (17); value (17); brain* (16); likes (15); mind* (15); agen* (13); judge* (13); ethical (12); remembered (11); evil (10); perspective (10); forgot* (9); opinion (9); recall* (9); appreciate (8); intellect* (7); moral* (7); focused (6); responsible (6); impressed (5); prepare* (5); abus* (4); envision* (4); attitude* (3); competen* (3); fair (3); visualiz* (3); adore* (2); calculate* (2); conclude* (2); deliberate (2); determined (2); infer* (2); organize* (2); responsive (2); attentive (1); conceive* (1); discretion (1); dislikes (1); formulate* (1); liking (1); memorize* (1); noble (1); rational (1); restrain* (1); unethical (1); unfair (1)";

pub const CHAT_AGENCY: &str = "think* (109); love* (21); understand* (21); mind* (20); thought* (13); believe* (12); realize* (9); plan* (7); memory (6); opinion (5); prefer* (5); aware* (4); brain* (4); decide* (4); imagin* (4); intelligen* (4); accept* (3); communicat* (3); conscious* (3); perspective (3); value (3); appreciate (2); forget* (2); infer* (2); control (1); evil (1); foresee* (1); impressed (1); inten* (1); mental* (1); predict* (1); prepare* (1); purpose (1); reason* (1); recall* (1); recogni* (1); remembered (1)";

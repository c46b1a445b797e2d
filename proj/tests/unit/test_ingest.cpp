#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "narrative/error.hpp"
#include "narrative/ingest.hpp"
#include "narrative/text.hpp"

using namespace narrative;
using namespace narrative::ingest;

namespace {

TranscriptSegment seg(std::int64_t seq, int ep, double start, std::string text, std::string speaker = "SarahKoenig") {
    TranscriptSegment s;
    s.sequence = seq;
    s.episode = ep;
    s.episode_title = "Episode " + std::to_string(ep);
    s.start_time = start;
    s.end_time = start + 1.0;
    s.text = std::move(text);
    s.speaker = std::move(speaker);
    return s;
}

std::string words(int n, const std::string& stem = "w") {
    std::string out;
    for (int i = 0; i < n; ++i) {
        if (i) out += ' ';
        out += stem + std::to_string(i);
    }
    return out;
}

}  // namespace

TEST(ParseTranscript, FiveRowsInOrder) {
    std::istringstream in(
        "sequence,episode,episode_title,start_time,end_time,text,speaker\n"
        "1,1,The Alibi,0.0,4.5,Hello there.,SarahKoenig\n"
        "2,1,The Alibi,4.5,9.0,\"Quoted, with comma\",AdnanSyed\n"
        "3,1,The Alibi,00:00:09.5,00:00:12,Third,SarahKoenig\n"
        "4,2,The Breakup,1:02,1:05,Fourth,JayWilds\n"
        "5,2,The Breakup,65,70,\"Line one\nline two\",SarahKoenig\n");
    auto segs = parse_transcript(in);
    ASSERT_EQ(segs.size(), 5u);
    for (std::size_t i = 0; i < segs.size(); ++i) EXPECT_EQ(segs[i].sequence, static_cast<int>(i) + 1);
    EXPECT_EQ(segs[1].text, "Quoted, with comma");
    EXPECT_DOUBLE_EQ(segs[2].start_time, 9.5);
    EXPECT_DOUBLE_EQ(segs[3].start_time, 62.0);
    EXPECT_EQ(segs[4].text, "Line one\nline two");
    EXPECT_EQ(segs[3].episode_title, "The Breakup");
}

TEST(ParseTranscript, CustomColumnMapping) {
    std::istringstream in("id,ep,title,from,to,utterance,who\n7,3,T,1,2,hi,Jay\n");
    ColumnMapping m;
    m.sequence = "id";
    m.episode = "ep";
    m.episode_title = "title";
    m.start_time = "from";
    m.end_time = "to";
    m.text = "utterance";
    m.speaker = "who";
    auto segs = parse_transcript(in, m);
    ASSERT_EQ(segs.size(), 1u);
    EXPECT_EQ(segs[0].speaker, "Jay");
    EXPECT_EQ(segs[0].episode, 3);
}

TEST(ParseTranscript, MissingSpeakerNamesTheRow) {
    std::istringstream in(
        "sequence,episode,episode_title,start_time,end_time,text,speaker\n"
        "1,1,T,0,1,fine,Sarah\n"
        "2,1,T,1,2,no speaker here\n");
    try {
        parse_transcript(in);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
        EXPECT_NE(msg.find("speaker"), std::string::npos) << msg;
    }
}

TEST(ParseTranscript, BadNumberNamesColumn) {
    std::istringstream in(
        "sequence,episode,episode_title,start_time,end_time,text,speaker\n"
        "1,one,T,0,1,fine,Sarah\n");
    try {
        parse_transcript(in);
        FAIL();
    } catch (const ParseError& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("row 1"), std::string::npos);
        EXPECT_NE(msg.find("'episode'"), std::string::npos) << msg;
    }
}

TEST(ParseTranscript, EmptyAndHeaderOnlyFilesFail) {
    std::istringstream empty("");
    EXPECT_THROW(parse_transcript(empty), ParseError);
    std::istringstream header("sequence,episode,episode_title,start_time,end_time,text,speaker\n");
    EXPECT_THROW(parse_transcript(header), ParseError);
}

TEST(ParseTranscript, RejectsDuplicateSequenceAndInvertedTimes) {
    std::istringstream dup(
        "sequence,episode,episode_title,start_time,end_time,text,speaker\n"
        "1,1,T,0,1,a,S\n1,1,T,1,2,b,S\n");
    EXPECT_THROW(parse_transcript(dup), ParseError);
    std::istringstream inv(
        "sequence,episode,episode_title,start_time,end_time,text,speaker\n"
        "1,1,T,5,1,a,S\n");
    EXPECT_THROW(parse_transcript(inv), ParseError);
}

TEST(Preprocess, SpeakerReplacesStandaloneI) {
    auto cfg = PreprocessConfig::defaults();
    auto out = preprocess_segment(seg(1, 1, 0, "I called him"), cfg);
    EXPECT_EQ(out.text, "SarahKoenig called him");
}

TEST(Preprocess, SpeakerWithSpacesIsJoined) {
    auto cfg = PreprocessConfig::defaults();
    auto out = preprocess_segment(seg(1, 1, 0, "Then I said, \"I know.\"", "Sarah Koenig"), cfg);
    EXPECT_EQ(out.text, "Then SarahKoenig said, \"SarahKoenig know.\"");
}

TEST(Preprocess, LeavesWordsContainingIAlone) {
    auto cfg = PreprocessConfig::defaults();
    auto out = preprocess_segment(seg(1, 1, 0, "It is in Illinois, isn't it? i think"), cfg);
    EXPECT_EQ(out.text, "It is in Illinois, is not it? i think");
}

TEST(Preprocess, ProperNounsJoined) {
    auto cfg = PreprocessConfig::defaults();
    cfg.proper_nouns = {"Adnan Syed", "Best Buy"};
    auto out = preprocess_segment(seg(1, 1, 0, "Adnan Syed went to Best Buy"), cfg);
    EXPECT_EQ(out.text, "AdnanSyed went to BestBuy");
}

TEST(Preprocess, ProperNounRespectsWordBoundaries) {
    auto cfg = PreprocessConfig::defaults();
    cfg.proper_nouns = {"Best Buy"};
    auto out = preprocess_segment(seg(1, 1, 0, "Best Buyer, Best Buy's lot"), cfg);
    EXPECT_EQ(out.text, "Best Buyer, BestBuy's lot");
}

TEST(Preprocess, ContractionRules) {
    auto cfg = PreprocessConfig::defaults();
    EXPECT_EQ(preprocess_segment(seg(1, 1, 0, "would've"), cfg).text, "would");
    EXPECT_EQ(preprocess_segment(seg(1, 1, 0, "didn't"), cfg).text, "did not");
    EXPECT_EQ(preprocess_segment(seg(1, 1, 0, "Didn't he?"), cfg).text, "Did not he?");
    EXPECT_EQ(preprocess_segment(seg(1, 1, 0, "I'd rather"), cfg).text, "SarahKoenig rather");
    EXPECT_EQ(preprocess_segment(seg(1, 1, 0, "I\xE2\x80\x99m here"), cfg).text, "SarahKoenig here");
}

TEST(Preprocess, WhitespaceAndPunctuationByteIdentical) {
    auto cfg = PreprocessConfig::defaults();
    std::string in = "  Hae,\tthe  (quiet)   one...\n  really?  ";
    EXPECT_EQ(preprocess_segment(seg(1, 1, 0, in), cfg).text, in);
}

TEST(Preprocess, RewriteCanBeDisabled) {
    auto cfg = PreprocessConfig::defaults();
    cfg.speaker_pronoun_rewrite = false;
    EXPECT_EQ(preprocess_segment(seg(1, 1, 0, "I called"), cfg).text, "I called");
}

TEST(Preprocess, IdempotentOnRandomText) {
    auto cfg = PreprocessConfig::defaults();
    cfg.proper_nouns = {"Adnan Syed", "Hae Min Lee", "Best Buy", "Leakin Park"};
    const std::vector<std::string> vocab = {"I",     "I'd",  "didn't", "would've", "Adnan", "Syed",  "Hae",
                                            "Min",   "Lee",  "Best",   "Buy",      "went",  "to",    "the",
                                            "park,", "I'm",  "can't",  "Leakin",   "Park.", "\"I",   "isn't",
                                            "i",     "It's", "won't",  "you'll",   "(I)",   "Min-Lee"};
    std::mt19937 rng(7);
    for (int trial = 0; trial < 500; ++trial) {
        std::string s;
        int n = 1 + static_cast<int>(rng() % 12);
        for (int k = 0; k < n; ++k) {
            if (k) s += (rng() % 5 == 0) ? "  " : " ";
            s += vocab[rng() % vocab.size()];
        }
        auto once = preprocess_segment(seg(1, 1, 0, s, "Sarah Koenig"), cfg);
        auto twice = preprocess_segment(once, cfg);
        ASSERT_EQ(once.text, twice.text) << "input: " << s;
    }
}

TEST(PreprocessConfig, ProperNounNeedsInternalSpace) {
    auto cfg = PreprocessConfig::defaults();
    cfg.proper_nouns = {"Adnan"};
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(SegmentLabelTest, RenderAndParse) {
    SegmentLabel l{2, 51};
    EXPECT_EQ(l.render(), "2_51");
    EXPECT_EQ(SegmentLabel::parse("2_51"), l);
    EXPECT_THROW(SegmentLabel::parse("2-51"), ParseError);
    EXPECT_THROW(SegmentLabel::parse("_3"), ParseError);
    EXPECT_THROW(SegmentLabel::parse("0_3"), ParseError);
    for (int ep = 1; ep <= 12; ++ep)
        for (int ord = 1; ord <= 300; ord += 7) {
            SegmentLabel x{ep, ord};
            EXPECT_EQ(SegmentLabel::parse(x.render()), x);
        }
}

TEST(LabelAndFilter, FiftyFirstSegmentOfEpisodeTwo) {
    std::vector<TranscriptSegment> segs;
    for (int i = 0; i < 60; ++i) segs.push_back(seg(100 + i, 2, 60.0 - i, "line " + std::to_string(i)));
    segs.push_back(seg(1, 1, 0, "episode one"));
    auto labeled = label_and_filter(segs, PreprocessConfig::defaults());
    ASSERT_EQ(labeled.size(), 61u);
    EXPECT_EQ(labeled[0].label.render(), "1_1");
    // Timestamp order reverses the input order within episode 2.
    EXPECT_EQ(labeled[51].label.render(), "2_51");
    EXPECT_EQ(labeled[51].segment.sequence, 100 + (60 - 51));
}

TEST(LabelAndFilter, DropsOpeningsAndKeepsOrder) {
    auto cfg = PreprocessConfig::defaults();
    FilterRule prefix;
    prefix.pattern = "Previously on";
    FilterRule rx;
    rx.kind = FilterRule::Kind::Regex;
    rx.pattern = "^This is Serial";
    rx.episodes = {2};
    cfg.opening_filters = {prefix, rx};
    std::vector<TranscriptSegment> segs = {
        seg(1, 1, 0, "Previously on Serial, a lot happened."), seg(2, 1, 1, "This is Serial, episode one."),
        seg(3, 1, 2, "Content A"),                             seg(4, 2, 0, "Previously on Serial..."),
        seg(5, 2, 1, "This is Serial, episode two."),         seg(6, 2, 2, "Content B"),
    };
    auto labeled = label_and_filter(segs, cfg);
    std::vector<std::int64_t> seqs;
    for (const auto& l : labeled) seqs.push_back(l.segment.sequence);
    EXPECT_EQ(seqs, (std::vector<std::int64_t>{2, 3, 6}));
    EXPECT_EQ(labeled[0].label.render(), "1_1");
    EXPECT_EQ(labeled[1].label.render(), "1_2");
    EXPECT_EQ(labeled[2].label.render(), "2_1");
}

// Hand count: rows 3 ("Um, uh...") and 8 ("Yeah. Okay.") reduce to nothing.
TEST(LabelAndFilter, FillerRemovalDropsTwoOfTenRows) {
    auto cfg = PreprocessConfig::defaults();
    cfg.filler_removal = true;
    std::vector<TranscriptSegment> segs = {
        seg(1, 1, 0, "Hae went to track practice."),
        seg(2, 1, 1, "Um, she was late that day."),
        seg(3, 1, 2, "Um, uh..."),
        seg(4, 1, 3, "You know, the call log matters."),
        seg(5, 1, 4, "The body was found in Leakin Park."),
        seg(6, 1, 5, "So, like, who saw her last?"),
        seg(7, 1, 6, "Jay kind of remembers."),
        seg(8, 1, 7, "Yeah. Okay."),
        seg(9, 1, 8, "Mhm, the detectives called."),
        seg(10, 1, 9, "That was in January."),
    };
    auto with = label_and_filter(segs, cfg);
    cfg.filler_removal = false;
    auto without = label_and_filter(segs, cfg);
    EXPECT_EQ(without.size(), 10u);
    ASSERT_EQ(with.size(), 8u);
    EXPECT_EQ(with[1].segment.text, "she was late that day.");
    EXPECT_EQ(with[2].segment.text, "the call log matters.");
    EXPECT_EQ(with[4].segment.text, "who saw her last?");
    EXPECT_EQ(with[5].segment.text, "Jay remembers.");
    EXPECT_EQ(with[6].segment.text, "the detectives called.");
    EXPECT_EQ(with[7].label.render(), "1_8");
}

TEST(LabelAndFilter, NeverReorders) {
    std::mt19937 rng(3);
    auto cfg = PreprocessConfig::defaults();
    FilterRule r;
    r.kind = FilterRule::Kind::Regex;
    r.pattern = "drop";
    cfg.opening_filters = {r};
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<TranscriptSegment> segs;
        for (int i = 0; i < 40; ++i)
            segs.push_back(seg(i, 1 + static_cast<int>(rng() % 3), static_cast<double>(rng() % 1000),
                               rng() % 4 == 0 ? "drop me" : "keep " + std::to_string(i)));
        auto all = label_and_filter(segs, PreprocessConfig::defaults());
        auto kept = label_and_filter(segs, cfg);
        // kept must be a subsequence of all.
        std::size_t j = 0;
        for (const auto& k : kept) {
            while (j < all.size() && all[j].segment.sequence != k.segment.sequence) ++j;
            ASSERT_LT(j, all.size());
        }
    }
}

namespace {
std::vector<LabeledSegment> labeled_of_sizes(const std::vector<int>& sizes) {
    std::vector<LabeledSegment> out;
    int ord = 0;
    for (int n : sizes) {
        LabeledSegment ls;
        ls.label = {1, ++ord};
        ls.segment = seg(ord, 1, ord, words(n, "s" + std::to_string(ord) + "w"));
        out.push_back(ls);
    }
    return out;
}
std::vector<int> counts(const std::vector<Chunk>& chunks) {
    std::vector<int> out;
    for (const auto& c : chunks) out.push_back(c.token_count);
    return out;
}
}  // namespace

TEST(ChunkSegments, ExactFit) {
    auto chunks = chunk_segments(labeled_of_sizes({200, 200, 200}), 600);
    EXPECT_EQ(counts(chunks), (std::vector<int>{600}));
    EXPECT_EQ(chunks[0].source_labels.size(), 3u);
}

TEST(ChunkSegments, GreedyPacking) {
    auto chunks = chunk_segments(labeled_of_sizes({250, 250, 250}), 600);
    EXPECT_EQ(counts(chunks), (std::vector<int>{500, 250}));
    EXPECT_EQ(chunks[1].source_labels, (std::vector<SegmentLabel>{{1, 3}}));
}

TEST(ChunkSegments, OverlongSegmentSplits) {
    auto chunks = chunk_segments(labeled_of_sizes({700}), 600);
    EXPECT_EQ(counts(chunks), (std::vector<int>{600, 100}));
    EXPECT_EQ(chunks[0].source_labels, chunks[1].source_labels);
    EXPECT_EQ(chunks[0].id, "chunk_0001");
    EXPECT_EQ(chunks[1].id, "chunk_0002");
}

TEST(ChunkSegments, RejectsNonPositiveSize) {
    EXPECT_THROW(chunk_segments(labeled_of_sizes({3}), 0), ConfigError);
    EXPECT_THROW(chunk_segments(labeled_of_sizes({3}), -5), ConfigError);
}

TEST(ChunkSegments, PartitionsTheTokenStream) {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<int> sizes;
        int n = 1 + static_cast<int>(rng() % 20);
        for (int i = 0; i < n; ++i) sizes.push_back(static_cast<int>(rng() % 90));
        int limit = 1 + static_cast<int>(rng() % 100);
        auto labeled = labeled_of_sizes(sizes);
        auto chunks = chunk_segments(labeled, limit);

        std::vector<std::string> in_tokens, out_tokens;
        for (const auto& l : labeled)
            for (auto& w : text::split_whitespace(l.segment.text)) in_tokens.push_back(w);
        for (const auto& c : chunks) {
            ASSERT_GT(c.token_count, 0);
            ASSERT_LE(c.token_count, limit);
            ASSERT_FALSE(c.source_labels.empty());
            ASSERT_TRUE(std::is_sorted(c.source_labels.begin(), c.source_labels.end()));
            auto toks = text::split_whitespace(c.text);
            ASSERT_EQ(static_cast<int>(toks.size()), c.token_count);
            out_tokens.insert(out_tokens.end(), toks.begin(), toks.end());
        }
        ASSERT_EQ(in_tokens, out_tokens);
    }
}

TEST(ChunkStore, JsonLinesRoundTrip) {
    auto chunks = chunk_segments(labeled_of_sizes({5, 7, 9}), 10);
    std::stringstream ss;
    write_chunks(ss, chunks);
    std::string line;
    std::getline(ss, line);
    EXPECT_NE(line.find("\"source_labels\":[\"1_1\"]"), std::string::npos) << line;
}

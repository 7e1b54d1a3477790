import io
import json
import unicodedata

import pytest
from hypothesis import given, settings, strategies as st

from ardata.corpus import (
    CharMap,
    CharMapMode,
    Document,
    Source,
    ingest_jsonl,
    normalize_chars,
    strip_title_date,
)


def ingest(lines):
    rejects = []
    stream = io.BytesIO(("\n".join(lines) + "\n").encode("utf-8"))
    docs = list(ingest_jsonl(stream, on_reject=rejects.append))
    return docs, rejects


# --- ingestion ---------------------------------------------------------------


def test_ingest_single_record():
    docs, rejects = ingest(['{"id":"a","text":"hi"}'])
    assert rejects == []
    assert docs == [Document(id="a", text="hi", source=Source.OTHER)]


def test_ingest_missing_text_rejected():
    docs, rejects = ingest(['{"id":"a"}'])
    assert docs == []
    assert len(rejects) == 1
    assert rejects[0].line == 1
    assert rejects[0].reason == "missing text"


def test_ingest_malformed_middle_line_preserves_order():
    docs, rejects = ingest(['{"id":"a","text":"one"}', "{oops", '{"id":"c","text":"three"}'])
    assert [d.id for d in docs] == ["a", "c"]
    assert [r.line for r in rejects] == [2]


def test_ingest_synthesizes_id_from_line_number():
    docs, _ = ingest(['{"text":"x"}', '{"text":"y"}'])
    assert [d.id for d in docs] == ["1", "2"]


def test_ingest_invalid_utf8_rejected():
    stream = io.BytesIO(b'{"id":"a","text":"ok"}\n\xff\xfe{"bad": 1}\n')
    rejects = []
    docs = list(ingest_jsonl(stream, on_reject=rejects.append))
    assert [d.id for d in docs] == ["a"]
    assert rejects[0].reason == "invalid utf-8"


def test_ingest_source_parsing():
    docs, _ = ingest(
        ['{"text":"a","source":"culturax"}', '{"text":"b","source":"SANAD"}', '{"text":"c","source":"weird"}']
    )
    assert [d.source for d in docs] == [Source.CULTURAX, Source.SANAD, Source.OTHER]


_record = st.fixed_dictionaries({"text": st.text(max_size=20)})
_line = st.one_of(
    _record.map(lambda r: json.dumps(r)),
    st.sampled_from(["{broken", '{"no_text": 1}', "[1,2]", "null"]),
)


@given(st.lists(_line, max_size=30))
@settings(max_examples=50)
def test_ingest_accounts_for_every_line(lines):
    docs, rejects = ingest(lines) if lines else ([], [])
    assert len(docs) + len(rejects) == len(lines)


def test_document_requires_nonempty_id():
    with pytest.raises(ValueError):
        Document(id="", text="x")


# --- character unification ------------------------------------------------------


def test_normalize_ascii_unchanged():
    assert normalize_chars("hello 123") == "hello 123"


def test_normalize_presentation_form_beh():
    # Oracle: NFKC decomposition of the presentation-form codepoint.
    assert normalize_chars("ﺑ") == unicodedata.normalize("NFKC", "ﺑ") == "ب"


def test_normalize_allah_ligature():
    expected = unicodedata.normalize("NFKC", "ﷲ")
    assert normalize_chars("ﷲ") == expected
    assert len(expected) == 4


def test_normalize_matches_nfkc_on_entire_presentation_blocks():
    for lo, hi in ((0xFB50, 0xFDFF), (0xFE70, 0xFEFF)):
        for cp in range(lo, hi + 1):
            ch = chr(cp)
            assert normalize_chars(ch) == unicodedata.normalize("NFKC", ch), hex(cp)


def test_normalize_leaves_base_arabic_alone():
    text = "الكتاب على الطاولة، أبجد هوز"
    assert normalize_chars(text) == text


@given(st.text(max_size=60))
@settings(max_examples=200)
def test_normalize_idempotent(text):
    once = normalize_chars(text)
    assert normalize_chars(once) == once


def test_table_only_mode_skips_nfkc():
    table = CharMap(entries={ord("أ"): "ا"}, mode=CharMapMode.TABLE_ONLY)
    assert normalize_chars("أﺑ", table) == "اﺑ"


def test_override_table_applies_on_top_of_nfkc():
    merged = CharMap(entries={ord("أ"): "ا"})
    assert normalize_chars("أﺑ", merged) == "اب"


def test_charmap_rejects_mapping_onto_mapped_codepoint():
    with pytest.raises(ValueError):
        CharMap(entries={0x41: "ﺑ"})
    with pytest.raises(ValueError):
        CharMap(entries={0x41: "B", 0x42: "C"})


# --- leading title/date stripping ------------------------------------------------


def _doc(text):
    return Document(id="d", text=text)


def test_strip_noop_without_header():
    text = "نص المقال يبدأ مباشرة.\nومن ثم يستمر."
    assert strip_title_date(_doc(text)).text == text


def test_strip_title_and_iso_date():
    doc = _doc("عنوان\n2023-04-01\nنص المقال هنا.")
    assert strip_title_date(doc).text == "نص المقال هنا."


def test_strip_title_and_slash_date():
    doc = _doc("خبر عاجل\n01/04/2023\nالتفاصيل تلي العنوان.")
    assert strip_title_date(doc).text == "التفاصيل تلي العنوان."


def test_strip_title_and_arabic_indic_date():
    doc = _doc("عنوان\n٢٠٢٣/٠٤/٠١\nالنص الفعلي.")
    assert strip_title_date(doc).text == "النص الفعلي."


def test_mid_document_date_not_stripped():
    text = "فقرة أولى بلا تاريخ\nفقرة ثانية\n2023-04-01\nفقرة ثالثة"
    assert strip_title_date(_doc(text)).text == text


def test_long_first_line_not_a_title():
    text = ("كلمة " * 40).strip() + "\n2023-04-01\nالنص."
    assert strip_title_date(_doc(text)).text == text


_segment = st.text(alphabet="اب cd12-/.", min_size=0, max_size=12)


@given(st.lists(_segment, min_size=1, max_size=8))
@settings(max_examples=100)
def test_strip_removes_at_most_two_lines_and_keeps_suffix(lines):
    text = "\n".join(lines)
    result = strip_title_date(_doc(text)).text
    assert text.endswith(result)
    removed = text[: len(text) - len(result)]
    assert removed.count("\n") <= 2

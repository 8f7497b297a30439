#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "robassist/util.hpp"

namespace rob {

struct Paragraph {
    std::size_t index = 0;
    std::string section_header;
    std::string text;

    bool operator==(const Paragraph&) const = default;
};

// A parsed trial report. Immutable once ingested.
struct TrialDocument {
    std::string doc_id;
    std::string title;
    std::vector<std::string> authors;
    std::string abstract;
    std::vector<Paragraph> paragraphs;

    bool operator==(const TrialDocument&) const = default;
};

// Accepts either the S2ORC-style parse ({title, authors, abstract: [{text,
// section}], body_text: [{text, section}]}, optionally nested under
// "pdf_parse") or the canonical export produced by document_to_json.
// Abstract paragraphs are prepended to the body as retrievable paragraphs.
// The doc_id is taken from "doc_id"/"paper_id" when present, otherwise it is
// a content hash of the raw bytes.
TrialDocument ingest_document(std::string_view raw);
TrialDocument ingest_document(const json& raw, std::string_view raw_bytes);

std::string content_doc_id(std::string_view raw_bytes);

// Returns one description per violated invariant; empty means valid.
std::vector<std::string> validate_document(const TrialDocument& doc);

ordered_json document_to_json(const TrialDocument& doc);
std::string serialize_document(const TrialDocument& doc);

}  // namespace rob

#include "robassist/document.hpp"

#include "robassist/error.hpp"

namespace rob {
namespace {

std::string author_name(const json& a) {
    if (a.is_string()) return trim(a.get<std::string>());
    if (!a.is_object()) return {};
    std::string name;
    auto add = [&](const json& part) {
        std::string p = part.is_string() ? trim(part.get<std::string>()) : std::string{};
        if (p.empty()) return;
        if (!name.empty()) name += ' ';
        name += p;
    };
    if (a.contains("first")) add(a["first"]);
    if (a.contains("middle") && a["middle"].is_array())
        for (const auto& m : a["middle"]) add(m);
    if (a.contains("last")) add(a["last"]);
    if (name.empty() && a.contains("name")) add(a["name"]);
    return name;
}

std::string string_field(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) return {};
    return it->get<std::string>();
}

struct RawParagraph {
    std::string section;
    std::string text;
};

std::vector<RawParagraph> paragraph_list(const json& value, const char* what) {
    std::vector<RawParagraph> out;
    if (value.is_null()) return out;
    if (value.is_string()) {
        std::string t = trim(value.get<std::string>());
        if (!t.empty()) out.push_back({"", std::move(t)});
        return out;
    }
    if (!value.is_array()) fail(ErrorCode::Parse, std::string(what) + " must be a list of paragraphs");
    for (const auto& p : value) {
        if (p.is_string()) {
            std::string t = trim(p.get<std::string>());
            if (!t.empty()) out.push_back({"", std::move(t)});
            continue;
        }
        if (!p.is_object()) fail(ErrorCode::Parse, std::string(what) + " entries must be objects");
        std::string t = trim(string_field(p, "text"));
        if (t.empty()) continue;
        out.push_back({trim(string_field(p, "section")), std::move(t)});
    }
    return out;
}

TrialDocument from_canonical(const json& raw, std::string_view raw_bytes) {
    TrialDocument doc;
    doc.doc_id = string_field(raw, "doc_id");
    if (doc.doc_id.empty()) doc.doc_id = content_doc_id(raw_bytes);
    doc.title = trim(string_field(raw, "title"));
    if (auto it = raw.find("authors"); it != raw.end() && it->is_array())
        for (const auto& a : *it)
            if (auto n = author_name(a); !n.empty()) doc.authors.push_back(std::move(n));
    doc.abstract = string_field(raw, "abstract");
    const auto& paras = raw["paragraphs"];
    if (!paras.is_array()) fail(ErrorCode::Parse, "paragraphs must be a list");
    for (const auto& p : paras) {
        if (!p.is_object()) fail(ErrorCode::Parse, "paragraph entries must be objects");
        std::string text = trim(string_field(p, "text"));
        if (text.empty()) continue;
        doc.paragraphs.push_back({doc.paragraphs.size(), trim(string_field(p, "section_header")),
                                  std::move(text)});
    }
    if (doc.paragraphs.empty()) fail(ErrorCode::EmptyDocument, "document has no paragraphs");
    return doc;
}

}  // namespace

std::string content_doc_id(std::string_view raw_bytes) {
    return "doc-" + sha256_hex(raw_bytes).substr(0, 16);
}

TrialDocument ingest_document(std::string_view raw) {
    return ingest_document(parse_json(raw, "document"), raw);
}

TrialDocument ingest_document(const json& raw_in, std::string_view raw_bytes) {
    if (!raw_in.is_object()) fail(ErrorCode::Parse, "document must be a JSON object");
    if (raw_in.contains("paragraphs")) return from_canonical(raw_in, raw_bytes);

    // doc2json output nests the parse under pdf_parse.
    const json* parse = &raw_in;
    if (!raw_in.contains("body_text") && raw_in.contains("pdf_parse") && raw_in["pdf_parse"].is_object())
        parse = &raw_in["pdf_parse"];
    if (!parse->contains("body_text"))
        fail(ErrorCode::Parse, "document has no body_text list");

    TrialDocument doc;
    doc.doc_id = string_field(raw_in, "doc_id");
    if (doc.doc_id.empty()) doc.doc_id = string_field(raw_in, "paper_id");
    if (doc.doc_id.empty()) doc.doc_id = content_doc_id(raw_bytes);
    doc.title = trim(string_field(raw_in, "title"));
    if (auto it = raw_in.find("authors"); it != raw_in.end() && it->is_array())
        for (const auto& a : *it)
            if (auto n = author_name(a); !n.empty()) doc.authors.push_back(std::move(n));

    auto abstract = paragraph_list(parse->contains("abstract") ? (*parse)["abstract"]
                                                                : raw_in.value("abstract", json()),
                                   "abstract");
    auto body = paragraph_list((*parse)["body_text"], "body_text");

    for (auto& p : abstract) {
        if (!doc.abstract.empty()) doc.abstract += "\n\n";
        doc.abstract += p.text;
        doc.paragraphs.push_back({doc.paragraphs.size(),
                                  p.section.empty() ? std::string("Abstract") : p.section, p.text});
    }
    for (auto& p : body)
        doc.paragraphs.push_back({doc.paragraphs.size(), std::move(p.section), std::move(p.text)});

    if (doc.paragraphs.empty()) fail(ErrorCode::EmptyDocument, "document has no extractable paragraphs");
    return doc;
}

std::vector<std::string> validate_document(const TrialDocument& doc) {
    std::vector<std::string> out;
    if (doc.doc_id.empty()) out.emplace_back("empty doc_id");
    if (doc.paragraphs.empty()) out.emplace_back("document has no paragraphs");
    for (std::size_t i = 0; i < doc.paragraphs.size(); ++i) {
        const auto& p = doc.paragraphs[i];
        if (p.index != i)
            out.push_back("non-contiguous index: position " + std::to_string(i) + " has index " +
                          std::to_string(p.index));
        if (trim(p.text).empty()) out.push_back("empty paragraph at index " + std::to_string(p.index));
    }
    return out;
}

ordered_json document_to_json(const TrialDocument& doc) {
    ordered_json j;
    j["doc_id"] = doc.doc_id;
    j["title"] = doc.title;
    j["authors"] = doc.authors;
    j["abstract"] = doc.abstract;
    ordered_json paras = ordered_json::array();
    for (const auto& p : doc.paragraphs)
        paras.push_back({{"index", p.index}, {"section_header", p.section_header}, {"text", p.text}});
    j["paragraphs"] = std::move(paras);
    return j;
}

std::string serialize_document(const TrialDocument& doc) { return document_to_json(doc).dump(2); }

}  // namespace rob

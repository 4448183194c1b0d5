#include "dyad/session.hpp"

namespace dyad {

std::string to_string(Source s) {
    return s == Source::Emitter ? "emitter" : "receiver";
}

std::string to_string(Modality m) {
    switch (m) {
        case Modality::Audio: return "audio";
        case Modality::Eye: return "eye";
        case Modality::Facial: return "facial";
        case Modality::Physio: return "physio";
    }
    return "?";
}

Source source_from_string(const std::string& s) {
    if (s == "emitter") return Source::Emitter;
    if (s == "receiver") return Source::Receiver;
    throw DataError("unknown source: " + s);
}

Modality modality_from_string(const std::string& s) {
    if (s == "audio") return Modality::Audio;
    if (s == "eye") return Modality::Eye;
    if (s == "facial") return Modality::Facial;
    if (s == "physio") return Modality::Physio;
    throw DataError("unknown modality: " + s);
}

bool modality_allowed(Source source, Modality modality) {
    if (source == Source::Emitter) return modality != Modality::Physio;
    return modality != Modality::Audio;
}

void RawStream::validate() const {
    if (!modality_allowed(source, modality))
        throw DataError("modality " + to_string(modality) + " not available for " +
                        to_string(source));
    if (static_cast<int>(channel_names.size()) != channels())
        throw DataError("channel_names length does not match channel count");
}

void SessionBundle::validate() const {
    int t = timeline_length();
    if (emitter.timeline_length() != t || receiver.timeline_length() != t)
        throw DataError("session " + session_id + ": timeline lengths differ");
    if (labels.cols() != 2)
        throw DataError("session " + session_id + ": labels must have 2 columns");
    if (!labels.all_finite())
        throw DataError("session " + session_id + ": non-finite label");
}

}  // namespace dyad

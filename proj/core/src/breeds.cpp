#include "gazegpt/breeds.hpp"

#include <fstream>
#include <set>

#include "gazegpt/error.hpp"

namespace gazegpt::evalstats {

const std::vector<std::string>& default_breeds() {
    static const std::vector<std::string> breeds{
        "Affenpinscher", "Afghan Hound", "Airedale Terrier", "Akita", "Alaskan Malamute",
        "American Eskimo Dog", "American Foxhound", "American Staffordshire Terrier",
        "Australian Cattle Dog", "Australian Shepherd", "Basenji", "Basset Hound", "Beagle",
        "Bearded Collie", "Bedlington Terrier", "Bernese Mountain Dog", "Bichon Frise",
        "Bloodhound", "Border Collie", "Border Terrier", "Borzoi", "Boston Terrier", "Boxer",
        "Brittany", "Brussels Griffon", "Bull Terrier", "Bulldog", "Bullmastiff", "Cairn Terrier",
        "Cavalier King Charles Spaniel", "Chihuahua", "Chinese Crested", "Chow Chow",
        "Cocker Spaniel", "Collie", "Dachshund", "Dalmatian", "Doberman Pinscher", "English Setter",
        "English Springer Spaniel", "French Bulldog", "German Shepherd Dog",
        "German Shorthaired Pointer", "Golden Retriever", "Great Dane", "Great Pyrenees",
        "Greyhound", "Havanese", "Irish Setter", "Irish Wolfhound", "Italian Greyhound",
        "Japanese Chin", "Keeshond", "Labrador Retriever", "Lhasa Apso", "Maltese", "Mastiff",
        "Miniature Pinscher", "Miniature Schnauzer", "Newfoundland", "Norwegian Elkhound",
        "Papillon", "Pekingese", "Pembroke Welsh Corgi", "Pomeranian", "Poodle", "Pug",
        "Rhodesian Ridgeback", "Rottweiler", "Saint Bernard", "Samoyed", "Scottish Terrier",
        "Shetland Sheepdog", "Shiba Inu", "Shih Tzu", "Siberian Husky", "Vizsla", "Weimaraner",
        "West Highland White Terrier", "Whippet", "Yorkshire Terrier"};
    return breeds;
}

std::vector<std::string> load_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw MissingAssetError(path.string());
    }
    std::vector<std::string> labels;
    std::set<std::string> seen;
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        auto label = line.substr(first, last - first + 1);
        if (!seen.insert(label).second) {
            throw SchemaError("labels", "duplicate label '" + label + "'");
        }
        labels.push_back(std::move(label));
    }
    return labels;
}

}  // namespace gazegpt::evalstats

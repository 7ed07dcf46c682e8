#include "snipcrs/prompts.hpp"

#include <fmt/format.h>

#include "snipcrs/text.hpp"

namespace snipcrs::prompts {

namespace {

constexpr std::string_view kDecomposeSystem =
    "You are a helpful assistant. Follow the instructions. No prose.";

constexpr std::string_view kDecomposeYelp = R"PROMPT(As a language genius, you are tasked with reading restaurant reviews and extracting and summarizing atomic, simple, short and coherent sentences that contain factual descriptions or subjective opinions related to a specific aspect of the restaurant, and subsequently you also need to (1) identify the topic of each atomic sentence and (2) the attitude towards the restaurant in terms of this proposition. The topics should be the aspects relevant to restaurant domains. You should use multiple atomic propositions if the content is about several topics, but combine similar content into one proposition.

Ensure these sentences carry information that effectively help differentiate various restaurants. If there is already a proposition with a similar meaning, ignore the redundant information. Ignore the irrelevant chatter, narratives and descriptions unrelated to the properties of the restaurant in the reviews. Try to use original texts from the reviews and but do summarize them if they are verbose. Be sure to cover the whole review. Try to eliminate any references of "I" or "reviewer", but focus on "restaurant". Follow the exemplar format to extract.

Analyze this review:
```Harbor Seafood is the type of restaurant that's most like a bag of Lay's chips. One visit is never enough.  I can't begin to count the number of patrons I hear say they have just landed at the airport and headed straight over, or they have been in town a few days and already visited multiple times, or are headed home and just had to stop in one more time before the flight home.  The one thing I love most about this restaurant even more than the food is the fact that I can sit at the bar on any given day and I'm just as likely to sit next to a regular as I am to sit next to someone from half way around the world. People literally flock to this hole in the wall neighborhood seafood restaurant.  It's a relatively small restaurant so if you need a table your more than likely going to have to wait. Sometimes when it's real busy there is even a wait for the bar. All seating is first come first served & they do not take reservations. You can also order food to go if you don't have the inclination or the time to sit in the restaurant and eat, but I'll admit this is the type of food that is at its best when you sit in and eat.```

[
    "One visit is never enough."
    "Patrons love to visit this restaurant multiple times.",
    "Some guests come from halfway around the world.",
    "It's a relatively small restaurant.",
    "Waiting for a table is probable.",
    "Wait for the bar is also possible.",
    "All seating is first come, first served.",
    "They do not take reservations.",
    "Order food to go is allowed.",
    "Sit in and eat is recommended for this kind of food."
]

Analyze this review:
```I find it slightly unsettling to have a reservation at 4:00 and that's when the restaurant opens. Standing outside with several other guest appeared like a soup line during the depression. However a better dressed group. This a bad look. Approximately 10 minutes before the official restaurant opening allow your patrons to enter the lobb foyer area to check in. \n\nOnce inside everyone was pleasant and professional. I was checked in and seated within 5 minutes. The restaurant is large however I was seated at the opening of the restroom. UGH. Luckily there wasn't much traffic, during Covid you would think more people would be washing their hands, nope!\n\nI asked for medium well steak however based on the temperature description given by Mindy I was informed the steak would be pink. With more information  I ordered my bone in ribeye medium plus (?).  Although the steak was juicy it was very crisp to 'blackened' and quite pink inside.\nNot as described.  The Praline Sweet Potato is listed: whipped - vanilla bean - mascarpone - candied pecans - streusel crisp  it lacked any flavor whatsoever, and was extremely stringy which is a NO\nNO! . This dish should be smooth as pudding bursting with flavor and texture. It got better with the king crab meat and avocado stack that was a generous portion with flavor and fresh. The freshly baked hot and slightly buttery rolls were the best item offered during this meal. \n\nMy server Mindy was professional, prompt and efficient. Perhaps trying to recover for Covid slowness is difficult for some because the meal was a disaster for me. This is no reflection on her Mindy but  I totally wasted $100.```

[
    "Opening time is 4:00.",
    "Waiting may also be required for an early reservation.",
    "Patrons are allowed in approximately 10 minutes before the official restaurant opening.",
    "Everyone was pleasant and professional.",
    "Checked in and seated is fast.",
    "The restaurant is large.",
    "Seating position can be bad.",
    "Medium well steak would be pink.",
    "Bone-in ribeye medium plus is served.",
    "Although the bone-in ribeye medium is juicy, it is very crisp to 'blackened' and quite pink inside, not as described.",
    "Praline sweet potato lacks flavor and is extremely stringy.",
    "King crab meat and avocado stack is a generous portion.",
    "King crab meat and avocado stack is flavorful and fresh.",
    "Fresh baked hot and slightly buttery rolls are the best item.",
    "Server is professional, prompt, and efficient.",
    "The meal is a disaster.",
    "It feels like a waste of money."
]

Analyze this review:
```{review}```)PROMPT";

// {noun}/{nouns} are filled per domain before {review}; the few-shot
// examples stay about books.
constexpr std::string_view kDecomposeAmazon = R"PROMPT(As a language genius, you are tasked with reading {noun} reviews and extracting and summarizing atomic, simple, short and coherent sentences that contain factual descriptions or subjective opinions related to a specific aspect of the {noun}. You should use multiple atomic propositions if the content is about several topics, but combine similar content into one proposition.

Ensure these sentences carry information that effectively help differentiate various {nouns}. If there is already a proposition with a similar meaning, ignore the redundant information. Ignore the irrelevant chatter, narratives and descriptions unrelated to the properties of the restaurant in the reviews. Try to use original texts from the reviews and but do summarize them if they are verbose. Be sure to cover the whole review. Try to eliminate any references of "I" or "reviewer", but focus on "{noun}". Follow the exemplar format to extract.

Analyze this review:
```I purchased this book when it first came out.  I was initially pleased and made place mats by using one of the patterns. They came out well and I had no problems.  I recently completed a warp to make Serendipity, one of the more attractive patterns featured in the book. I reviewed the directions for threading but counting up the number of ends I would need and comparing the count with the pattern in the book I had a different count. I recounted several times and even tried several ways of adding things up but my end count remained the same. I assume that I misunderstood the sparse directions which were not clear. ```

[
"The book provides patterns for projects like place mats.",
"The pattern 'Serendipity' is one of the more attractive options in the book.",
"Threading directions were sparse",
"Threading directions were unclear",
]

Analyze this review:
```I found it difficult to find the information I needed.  The instructions were not particularly clear to me.```

[
"It is difficult to find needed information.",
"Instructions were not clear."
]

Analyze this review:
```The imagery in this book is so good that I actually slept with my light on a few times. I chose this book because I'm a fan of horror in general and the exorcist is one of my all time favorites. I didn't have high expectations of this book because the subjects been over done but this book reeled me in from the very beginning.```

[
"The book's imagery is so scary that it caused a need to sleep with the light on.",
"The book has connection to the horror genre and similarity to The Exorcist, a classic favorite.",
"Despite the overdone subject, the book captivates from the very beginning."
]


Analyze this review:
```Gorgeous coffee table book, chock full of absolutely amazing National Geographic photography. Beautiful landscapes, I particularly loved the northern lights since I am planning a trip to Iceland for 2019. This book would make an absolutely beautiful Christmas, Holiday, birthday, Mother's or Father's Day present for anyone who loves nature I have several NG books and each year they seem to get better and more spectacular!```

[
"The book is a gorgeous coffee table book.",
"The book is filled with amazing National Geographic photography.",
"The book features beautiful landscapes.",
"The book features the northern lights.",
"The book is an ideal gift for nature lovers.",
"The book is an ideal gift for occasions like Christmas, holidays, birthdays, Mother's Day, or Father's Day.",
]

Analyze this review:
```{review}```)PROMPT";

constexpr std::string_view kQuerySystem = "You are a helpful assistant.";

constexpr std::string_view kQueryYelp = R"PROMPT(You are provided with a pair of a question and a response related to restaurant recommendations. The question asks about preferences for a restaurant, and the response may provide specific information about the user's preferences or indicate that there is no particular preference.

**Your task:**

1. **Extract Intents:** Identify any stated preferences or dislikes about restaurants in the response.
2. **Convert to Requirement Statements:** Write short, complete sentences that objectively describe a requirement for the restaurant search. Avoid using subjective phrases like "the user likes" or "the user wants." Instead, write factual statements.
3. **Annotate:**
    - `prop`: A brief description of the restaurant feature the user prefers or dislikes.
    - `sentiment`: `preference` or `dislike`.

**Example 1:**

Input:

- Question: "What kind of ambiance are you looking for in a restaurant?"
- Response: "I want a lively spot with good music and maybe outdoor seating. I'm not into anything too formal."
- Known intents: None

Output:

```
[
    Intent(prop="the place is lively", sentiment="preference"),
    Intent(prop="the place has good music", sentiment="preference"),
    Intent(prop="the place has outdoor seating", sentiment="preference"),
    Intent(prop="the place is too formal", sentiment="dislike")
]

**Example 2:**

Input:

- Question: "Any preferences for the type of cuisine?"
- Response: "I love Burritos!"
- Known intents: None

Output:

```
[
    Intent(prop="burritos are served", sentiment="preference")
]
```


**Example 3:**

Input:

- Question: "Do you need parking spots at the restaurant?"
- Response: "Parking isn't really an issue for me. I'm just looking for a cozy cafe."
- Known intents:
    - preference
        - this place is a cafe.
        - the atmosphere is cozy.

Output:

```
[]
```


**Example 4:**

Input:

- Question: "Do you like cafes that are known for their desserts?"
- Response: "I'm not specifically looking for desserts."
- Known intents: None

Output:
```
[]
```

**Guidelines:**

- Disregard information in the response that doesn't express a preference or dislike.
- Annotate only clear and specific intents.
- Each intent should address a single topic; separate multiple topics into individual intents.
- Known intents (listed in the provided set) should not be repeated. Ensure that any new intent you extract is distinct and does not overlap with the known intents.
- If the response is vague or indicates no specific preference (e.g., "I'm open to...", "I'm not specifically looking for..."), return an empty list (`[]`).

**Analyze the following question-response pair:**

- Question: "{question}"
- Response: "{response}"
- Known intents: {intents}
)PROMPT";

constexpr std::string_view kQueryAmazon = R"PROMPT(You are provided with a pair of a question and a response related to {noun} recommendations. The question asks about preferences for a {noun}, and the response may provide specific information about the user's preferences or indicate that there is no particular preference.

**Your task:**

1. **Extract Intents:** Identify any stated preferences or dislikes about {nouns} in the response.
2. **Convert to Requirement Statements:** Write short, complete sentences that objectively describe a requirement for the {noun} search. Avoid using subjective phrases like "the user likes" or "the user wants." Instead, write factual statements.
3. **Annotate:**
    - `prop`: A brief description of the {noun} feature the user prefers or dislikes.
    - `sentiment`: `preference` or `dislike`.

**Example 1:**

Input:

- Question: "hat type of characters do you prefer in a book?"
- Response: "I enjoy stories with strong female protagonists and well-developed antagonists. I'm not a fan of overly simplistic characters."
- Known intents: None

Output:

```
[
    Intent(prop="the book has a strong female protagonist", sentiment="preference"),
    Intent(prop="the book has a well-developed antagonist", sentiment="preference"),
    Intent(prop="the book has overly simplistic characters", sentiment="dislike")
]

**Example 2:**

Input:

- Question: "Is there a specific genre you're interested in?"
- Response: "I love mystery novels!"
- Known intents: None

Output:

```
[
    Intent(prop="the genre is mystery", sentiment="preference")
]
```


**Example 3:**

Input:

- Question: "Do themes like adventure or romance matter to you in a book?"
- Response: "Themes aren't that important to me. I'm just looking for a good biography."
- Known intents:
    - preference
        - the book is a biography.

Output:

```
[]
```


**Example 4:**

Input:

- Question: "Do you prefer books with extensive world-building?"
- Response: "I'm not specifically looking for books with elaborate settings."
- Known intents: None

Output:
```
[]
```

**Guidelines:**

- Disregard information in the response that doesn't express a preference or dislike.
- Annotate only clear and specific intents.
- Each intent should address a single topic; separate multiple topics into individual intents.
- Known intents (listed in the provided set) should not be repeated. Ensure that any new intent you extract is distinct and does not overlap with the known intents.
- If the response is vague or indicates no specific preference (e.g., "I'm open to...", "I'm not specifically looking for..."), return an empty list (`[]`).

**Analyze the following question-response pair:**

- Question: "{question}"
- Response: "{response}"
- Known intents: {intents}
)PROMPT";

constexpr std::string_view kExpandSystem =
    "You are a helpful assistant. Strictly follow the format of the examples; do "
    "not provide anything other than the direct answer.";

constexpr std::string_view kParaphrase = R"PROMPT(Paraphrase a given sentence.
The sentence should be an atomic, simple, short and coherent sentence that contain factual descriptions or subjective opinions related to a specific aspect of the {noun}.

Paraphrase this sentence: "{sentence}")PROMPT";

constexpr std::string_view kSupportYelp = R"PROMPT(Generate a sentence that could serve as evidence for a given sentence.
The sentence should be an atomic, simple, short and coherent sentence that contain factual descriptions or subjective opinions related to a specific aspect of the restaurant.

<example>
Given sentence: "the restaurant is located in a bad neighborhood"
the restaurant is near bad crime area.

Given sentence: "the place is vegetarian-friendly."
the menu contains some veggie options.

Given sentence: "the place is good for family dinner."
high chairs are available.
<\example>

Given sentence: "{sentence}")PROMPT";

constexpr std::string_view kSupportAmazon = R"PROMPT(Generate a sentence that could serve as evidence for a given sentence.
The sentence should be an atomic, simple, short and coherent sentence that contain factual descriptions or subjective opinions related to a specific aspect of the {noun}.

<example>
Given sentence: "The book is a thrilling mystery."
The plot involves unexpected twists.

Given sentence: "The book is suitable for children."
There are colorful illustrations.

Given sentence: "The book is well-researched."
It includes detailed historical references.
<\example>

Given sentence: "{sentence}")PROMPT";

constexpr std::string_view kOppositeYelp = R"PROMPT(Generate the sentence of opposite meaning in restaurant domain following the examples.

<example>
What's the opposite of this sentence: "this place has sweet options like Cannolis"
This place lacks sweet options like Cannolis.

What's the opposite of this sentence: "this place is too crowded."
This place is very spacious.
<\example>

What's the opposite of this sentence: "{sentence}")PROMPT";

constexpr std::string_view kOppositeAmazon = R"PROMPT(Generate the sentence of opposite meaning in {noun} domain following the examples.

<example>
What's the opposite of this sentence: "This book has thrilling moments like a detective novel."
This book lacks thrilling moments like a detective novel.

What's the opposite of this sentence: "This book is very predictable."
This book is full of surprises.
<\example>

What's the opposite of this sentence: "{sentence}")PROMPT";

constexpr std::string_view kClarifySystem =
    "You are a Recommender chatting with a Seeker to provide {noun} recommendation. "
    "Your task is to ask questions for understanding the Seeker's preference.";

constexpr std::string_view kClarify = R"PROMPT(# Role-Play Task: Recommender
You will play the role of a Recommender helping a Seeker find a {noun} that suits the Seeker's preferences.

Based on the conversation log provided below, identify the most relevant aspect of the Seeker's preferences that will help refine the search for a suitable {noun}. Your question should focus only on one topic. Do not ask about multiple topics at once.

**Dialogue Context:**
{context}
Recommender:

Now, generate a response in the role of the Recommender.

**Response Guidelines:**

- Your response should be concise, typically one sentence. Avoid asking multiple questions at once.
- Do not ask for a {noun} name or any personal or street names.
- Respond directly and concisely to the scenario without repeating the instructions or adding unrelated details. Use question types that give the human user more flexibility, allowing for creative and open-ended answers while staying relevant to the context.)PROMPT";

constexpr std::string_view kSimulateSystem =
    "You are a Seeker who is looking for a {noun} recommendation. No prose, be "
    "concise and casual in the conversation.";

constexpr std::string_view kSimulate = R"PROMPT(# Role-Play Task: Seeker
You will play the role of a Seeker looking for a {noun} recommendation. You will interact with a Recommender to find a {noun} that suits your preferences.

**Instructions:**

- The Recommender will ask for your preferences to identify a {noun} that aligns with your tastes. Your role is to provide responses as hints based on the details below.
- Express your preferences by answering the Recommender's questions based on the information provided below.

**Details of Your Favorite {Noun}:**

{item info}
{item review summary}

**Your Opinion About It:**

```
{review text}
```

**Dialogue Context:**

{dialogue context}
Seeker:

Now, generate a response in the role of the Seeker based on the information provided above.

**Response Guidelines:**

- Your response should be concise, typically one sentence. Avoid giving multiple preference details at once.
- If the data provided lacks specifics to answer the Recommender, communicate no particular preference. Try not to invent details.
- Tailor your responses around `Your Opinion About It` rather than `Details of Your Favorite {Noun}` when there is conflicting information.
- Keep your answers limited to the question asked.
- Do not reveal the name of your favorite {noun} or any personal or street names.
- Focus on answering the Recommender's questions. Do not proactively ask questions such as, "What kinds of {nouns} are there?" or "Can you tell me about different {aspects} in the area?")PROMPT";

constexpr std::string_view kSummarizeSystem =
    "You are a helpful assistant. Follow the instructions. No prose.";

constexpr std::string_view kSummarize = R"PROMPT(Below are {polarity} customer reviews of a single {noun}, followed by its listed details.
Summarize what the reviewers {verb} about this {noun} in exactly five short sentences.
Refer to it only as "{reference}". Do not mention its name, any personal names or street names.

**Details:**
{item info}

**Reviews:**
{reviews}

Summary:)PROMPT";

constexpr std::string_view kJudgeSystem =
    "Work as a judge and determine if the following proposition can be inferred "
    "from the given customer review in the {keywords}. No prose.";

constexpr std::string_view kJudge = R"PROMPT(Can the following proposition be inferred from the given customer review in the {keywords}?

Proposition: {hypo}
Customer Review: {premise}

Answer with 'yes' or 'no'.)PROMPT";

struct Nouns {
  std::string noun;
  std::string nouns;
  std::string capitalized;
  std::string aspects;  // what a seeker might ask the recommender to list
};

Nouns nouns_for(Domain d) {
  switch (d) {
    case Domain::restaurant:
      return {"restaurant", "restaurants", "Restaurant", "cuisines"};
    case Domain::book:
      return {"book", "books", "Book", "genres"};
    case Domain::clothing:
      return {"clothing item", "clothing items", "Clothing Item", "styles"};
  }
  return {"item", "items", "Item", "kinds"};
}

std::map<std::string, std::string> noun_values(Domain d) {
  auto n = nouns_for(d);
  return {{"noun", n.noun}, {"nouns", n.nouns}, {"Noun", n.capitalized},
          {"aspects", n.aspects}};
}

ChatRequest make(std::string system, std::string user, std::string_view tag) {
  ChatRequest r;
  r.system_prompt = std::move(system);
  r.user_prompt = std::move(user);
  r.temperature = 0.0;
  r.tag = std::string(tag);
  return r;
}

}  // namespace

std::string fill(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      auto close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = values.find(std::string(tmpl.substr(i + 1, close - i - 1)));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

std::string render_known_intents(const std::vector<KnownIntent>& intents) {
  if (intents.empty()) return "None";
  std::string prefer;
  std::string dislike;
  for (const auto& k : intents)
    (k.prefer ? prefer : dislike) += "\n        - " + k.text;
  std::string out;
  if (!prefer.empty()) out += "\n    - preference" + prefer;
  if (!dislike.empty()) out += "\n    - dislike" + dislike;
  return out;
}

ChatRequest decompose_review(Domain domain, std::string_view review_text) {
  // Two passes would let a review containing "{noun}" be rewritten, so
  // fill nouns into the template first, then the review alone.
  std::string tmpl = domain == Domain::restaurant
                         ? std::string(kDecomposeYelp)
                         : fill(kDecomposeAmazon, noun_values(domain));
  return make(std::string(kDecomposeSystem),
              fill(tmpl, {{"review", std::string(review_text)}}),
              tags::decompose_review);
}

ChatRequest decompose_response(Domain domain, std::string_view question,
                               std::string_view response,
                               const std::vector<KnownIntent>& known) {
  std::string tmpl = domain == Domain::restaurant
                         ? std::string(kQueryYelp)
                         : fill(kQueryAmazon, noun_values(domain));
  return make(std::string(kQuerySystem),
              fill(tmpl, {{"question", std::string(question)},
                          {"response", std::string(response)},
                          {"intents", render_known_intents(known)}}),
              tags::decompose_response);
}

ChatRequest paraphrase(Domain domain, std::string_view sentence) {
  return make(std::string(kExpandSystem),
              fill(fill(kParaphrase, noun_values(domain)),
                   {{"sentence", std::string(sentence)}}),
              tags::paraphrase);
}

ChatRequest support(Domain domain, std::string_view sentence) {
  std::string tmpl = domain == Domain::restaurant
                         ? std::string(kSupportYelp)
                         : fill(kSupportAmazon, noun_values(domain));
  return make(std::string(kExpandSystem),
              fill(tmpl, {{"sentence", std::string(sentence)}}), tags::support);
}

ChatRequest opposite(Domain domain, std::string_view sentence) {
  std::string tmpl = domain == Domain::restaurant
                         ? std::string(kOppositeYelp)
                         : fill(kOppositeAmazon, noun_values(domain));
  return make(std::string(kExpandSystem),
              fill(tmpl, {{"sentence", std::string(sentence)}}), tags::opposite);
}

ChatRequest clarification(Domain domain, std::string_view dialogue_context) {
  auto nouns = noun_values(domain);
  return make(fill(kClarifySystem, nouns),
              fill(fill(kClarify, nouns), {{"context", std::string(dialogue_context)}}),
              tags::clarify);
}

ChatRequest summarize(Domain domain, std::string_view item_info,
                      const std::vector<std::string>& reviews, bool positive) {
  auto values = noun_values(domain);
  values["polarity"] = positive ? "favorable" : "critical";
  values["verb"] = positive ? "like" : "dislike";
  values["reference"] = std::string(anonymous_reference(domain));
  std::string tmpl = fill(kSummarize, values);
  std::string listing;
  for (std::size_t i = 0; i < reviews.size(); ++i)
    listing += fmt::format("{}{}. {}", i ? "\n" : "", i + 1, reviews[i]);
  return make(std::string(kSummarizeSystem),
              fill(tmpl, {{"item info", std::string(item_info)}, {"reviews", listing}}),
              positive ? tags::summarize_positive : tags::summarize_negative);
}

ChatRequest simulate(Domain domain, std::string_view item_info,
                     std::string_view review_summary, std::string_view review_text,
                     std::string_view dialogue_context) {
  auto nouns = noun_values(domain);
  return make(fill(kSimulateSystem, nouns),
              fill(fill(kSimulate, nouns),
                   {{"item info", std::string(item_info)},
                    {"item review summary", std::string(review_summary)},
                    {"review text", std::string(review_text)},
                    {"dialogue context", std::string(dialogue_context)}}),
              tags::simulate);
}

ChatRequest judge(Domain domain, std::string_view proposition,
                  std::string_view review_text) {
  std::map<std::string, std::string> kw = {
      {"keywords", nouns_for(domain).noun + " domain"}};
  return make(fill(kJudgeSystem, kw),
              fill(fill(kJudge, kw), {{"hypo", std::string(proposition)},
                                      {"premise", std::string(review_text)}}),
              tags::judge);
}

}  // namespace snipcrs::prompts

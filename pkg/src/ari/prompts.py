"""Prompt templates for action selection and methodology induction."""

from __future__ import annotations

ACTION_TEMPLATE = """You answer questions by querying a temporal knowledge graph through the tools below. Several answers may be valid; giving one correct answer is enough.

Work out which entities and relations the question mentions, retrieve the facts you need with the actions, then give the answer.

Time-based Queries:
$getTime(HEAD, RELATION, TAIL)$ returns when the event (HEAD, RELATION, TAIL) happened.
$getBefore(ENTITY_LIST, TIME)$ keeps the items of the list that happened before TIME.
$getAfter(ENTITY_LIST, TIME)$ keeps the items of the list that happened after TIME.
$getBetween(ENTITY_LIST, START_TIME, END_TIME)$ keeps the items of the list that happened between the two times.

Entity Queries:
$getTailEntity(HEAD, RELATION, OPTIONAL_TIME)$ returns the tail entities linked from HEAD by RELATION.
$getHeadEntity(TAIL, RELATION, OPTIONAL_TIME)$ returns the head entities linked to TAIL by RELATION.

Specific Time Queries:
$getFirst(ENTITY_LIST)$ keeps the items with the earliest time.
$getLast(ENTITY_LIST)$ keeps the items with the latest time.
$answer(YOUR_ANSWER)$ submits your answer.

{{entities}} always refers to the result of the most recent action that returned something.
Note: Always enclose the selected action in $ and give a short reason.

Examples for your reference:
{examples}
(end of examples)

Current Challenge:

Question: {question}

Methodology: {methodology}
(end of methodology)

Previous Actions:
{history}
(end of previous actions)
{feedback}
Available Actions:
{actions}

Choose your next action from the available actions above and copy it completely. When you know the answer, use the answer function.

Organize your output by strictly following the format below:

Action:
<the chosen action enclosed in $. Times use the format YYYY or YYYY-MM or YYYY-MM-DD>

Reason:
<why this action>"""

DEFAULT_EXAMPLES = """Question: When did Country_A first sign an agreement with Country_B?
Action 0: $getTime(Country_A,Sign_formal_agreement,Country_B)$
Response 0: entities = [('Country_A', '2009-03-02'), ('Country_A', '2011-07-19')]
Action 1: $getFirst({entities})$
Response 1: entities = [('Country_A', '2009-03-02')]
Action 2: $answer(2009-03-02)$

Question: Who hosted a visit from Minister_X after Country_C did?
Action 0: $getTime(Country_C,Host_a_visit,Minister_X)$
Response 0: entities = [('Country_C', '2012-05-10')]
Action 1: $getHeadEntity(Minister_X,Host_a_visit,no time)$
Response 1: entities = [('Country_D', '2011-01-04'), ('Country_C', '2012-05-10'), ('Country_E', '2012-08-21')]
Action 2: $getAfter({entities},2012-05-10)$
Response 2: entities = [('Country_E', '2012-08-21')]
Action 3: $answer(Country_E)$"""

METHODOLOGY_TEMPLATE = """Study the correct and incorrect reasoning samples below. They all belong to one type of question. Extract the patterns behind the successes and the failures and write a general methodology for solving this type of question, covering the key steps and the pitfalls to avoid.

Task Definition: {task_definition}
(end of Task Definition)

Here is an example output:
Overall Instruction:
Questions of the form "who did R to C before B did" are solved in three moves: find the time t of (B, R, C), collect every head entity that did R to C, and keep the ones that happened before t.

Step-by-step Guide:
1. Use $getTime(B, R, C)$ to obtain the anchor time t.
2. Use $getHeadEntity(C, R, no time)$ to list candidate heads with their times.
3. Use $getBefore({{entities}}, t)$ to keep the candidates earlier than t, then $getLast({{entities}})$ if the latest one is wanted.
4. Finish with $answer(...)$.
(end of example output)

Correct samples:
{correct_examples}

Incorrect samples:
{incorrect_examples}
(end of samples)

Now write the methodology for this type of question. Keep it at the level of the question type, not of one specific question. Organize your output by strictly following the format below:

Overall Instruction:
<the methodology in general terms>

Step-by-step Guide:
<numbered steps naming the action to use at each step and why>"""

DEFAULT_TASK_DEFINITION = (
    "Answer a temporal question over a knowledge graph of (head, relation, tail, time) facts "
    "by choosing one action per step from a list of candidate actions, ending with answer(...)."
)
